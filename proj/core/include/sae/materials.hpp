#pragma once

// Course-material hub. Materials unlock by course-day index; visibility is a
// pure threshold filter so it can be tested without any storage.

#include "sae/model.hpp"
#include "sae/store.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sae {

enum class MaterialCategory { slides, exercise, example_code, data };

std::string_view to_string(MaterialCategory c);
std::optional<MaterialCategory> parse_material_category(std::string_view s);

struct Material {
    std::string material_id;
    std::string title;
    BlobRef blob;
    std::int64_t unlock_day = 0;
    MaterialCategory category = MaterialCategory::data;
    std::string file_name;  // suggested download name, may be empty

    friend bool operator==(const Material&, const Material&) = default;
};

void to_json(nlohmann::json& j, const Material& m);
void from_json(const nlohmann::json& j, Material& m);

/// Materials with unlock_day <= day, stably sorted by (unlock_day, title).
std::vector<Material> visible(std::span<const Material> all, std::int64_t day);

/// Maps dates to course-day indices: day 0 starts at `start` (UTC).
class CourseCalendar {
public:
    explicit CourseCalendar(Timestamp start) : start_(start) {}

    /// Whole days elapsed since the start; 0 before it.
    std::int64_t day_of(Timestamp t) const;
    Timestamp start_of_day(std::int64_t day) const;
    Timestamp start() const { return start_; }

    /// Accepts "YYYY-MM-DD" or a full RFC 3339 timestamp.
    static std::optional<CourseCalendar> parse(std::string_view text);

private:
    Timestamp start_;
};

class MaterialCatalog {
public:
    explicit MaterialCatalog(Store& store) : store_(store) {}

    /// Stores the bytes and the record. Throws InvalidArgument for an empty
    /// id or a negative unlock_day. Re-adding an id replaces it.
    Material add(const std::string& material_id, const std::string& title, std::string_view bytes,
                 std::int64_t unlock_day, MaterialCategory category, const std::string& file_name = "");
    bool remove(const std::string& material_id);
    std::optional<Material> get(const std::string& material_id) const;
    std::vector<Material> list() const;
    std::vector<Material> visible_on(std::int64_t day) const;

    /// Fails when the task's statement material exists and unlocks after the task.
    std::optional<std::string> check_statement(const TaskSpec& task) const;

private:
    Store& store_;
};

}  // namespace sae
