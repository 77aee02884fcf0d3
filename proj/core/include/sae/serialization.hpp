#pragma once

// JSON encodings of the domain types. These are the shapes persisted in the
// record store and returned by the HTTP API; see docs/api.md.

#include "sae/model.hpp"

#include <nlohmann/json.hpp>

#include <string>

namespace sae {

/// RFC 3339 UTC with millisecond precision, e.g. "2026-10-19T17:32:55.123Z".
std::string format_rfc3339(Timestamp t);
std::optional<Timestamp> parse_rfc3339(std::string_view text);

void to_json(nlohmann::json& j, const Weight& w);
void from_json(const nlohmann::json& j, Weight& w);

void to_json(nlohmann::json& j, const TestCase& c);
void from_json(const nlohmann::json& j, TestCase& c);

void to_json(nlohmann::json& j, const CheckerPolicy& p);
void from_json(const nlohmann::json& j, CheckerPolicy& p);

void to_json(nlohmann::json& j, const Mount& m);
void from_json(const nlohmann::json& j, Mount& m);

void to_json(nlohmann::json& j, const SandboxPolicy& p);
void from_json(const nlohmann::json& j, SandboxPolicy& p);

void to_json(nlohmann::json& j, const LanguageProfile& l);
void from_json(const nlohmann::json& j, LanguageProfile& l);

void to_json(nlohmann::json& j, const TaskSpec& t);
void from_json(const nlohmann::json& j, TaskSpec& t);

void to_json(nlohmann::json& j, const CaseResult& r);
void from_json(const nlohmann::json& j, CaseResult& r);

void to_json(nlohmann::json& j, const EvaluationReport& r);
void from_json(const nlohmann::json& j, EvaluationReport& r);

void to_json(nlohmann::json& j, const Submission& s);
void from_json(const nlohmann::json& j, Submission& s);

}  // namespace sae
