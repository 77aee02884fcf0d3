#include "sae/auth.hpp"

#include "sae/error.hpp"
#include "sae/hash.hpp"
#include "sae/serialization.hpp"

namespace sae {

using nlohmann::json;

std::string_view to_string(Role r) { return r == Role::teacher ? "teacher" : "student"; }

std::optional<Role> parse_role(std::string_view s) {
    if (s == "student") return Role::student;
    if (s == "teacher") return Role::teacher;
    return std::nullopt;
}

namespace {

json user_json(const User& u) {
    return json{{"user_id", u.user_id},
                {"role", std::string(to_string(u.role))},
                {"token_sha256", u.token_hash},
                {"expires_at", u.expires_at ? json(format_rfc3339(*u.expires_at)) : json(nullptr)}};
}

User user_from(const json& j) {
    User u;
    j.at("user_id").get_to(u.user_id);
    u.role = parse_role(j.value("role", "student")).value_or(Role::student);
    u.token_hash = j.value("token_sha256", "");
    if (auto it = j.find("expires_at"); it != j.end() && it->is_string()) u.expires_at = parse_rfc3339(it->get<std::string>());
    return u;
}

}  // namespace

std::string UserDirectory::add(const std::string& user_id, Role role, std::optional<Timestamp> expires_at) {
    auto token = random_hex(24);
    add_with_token(user_id, role, token, expires_at);
    return token;
}

void UserDirectory::add_with_token(const std::string& user_id, Role role, const std::string& token,
                                   std::optional<Timestamp> expires_at) {
    if (user_id.empty()) throw InvalidArgument("user id must not be empty");
    if (token.size() < 8) throw InvalidArgument("token must be at least 8 characters");
    User u{user_id, role, sha256_hex(token), expires_at};
    store_.records().put(Collection::users, user_id, user_json(u));
}

std::optional<User> UserDirectory::get(const std::string& user_id) const {
    auto r = store_.records().get(Collection::users, user_id);
    if (!r) return std::nullopt;
    return user_from(r->body);
}

std::vector<User> UserDirectory::list() const {
    std::vector<User> out;
    for (const auto& r : store_.records().list(Collection::users)) out.push_back(user_from(r.body));
    return out;
}

bool UserDirectory::remove(const std::string& user_id) { return store_.records().remove(Collection::users, user_id); }

std::optional<Session> UserDirectory::authenticate(const std::string& token, Timestamp now) const {
    if (token.empty()) return std::nullopt;
    auto digest = sha256_hex(token);
    for (const auto& u : list()) {
        if (u.token_hash != digest) continue;
        if (u.expires_at && *u.expires_at <= now) return std::nullopt;
        return Session{u.user_id, u.role};
    }
    return std::nullopt;
}

}  // namespace sae
