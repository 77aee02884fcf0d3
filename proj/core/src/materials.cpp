#include "sae/materials.hpp"

#include "sae/error.hpp"
#include "sae/serialization.hpp"

#include <algorithm>
#include <cstdio>

namespace sae {

using nlohmann::json;

std::string_view to_string(MaterialCategory c) {
    switch (c) {
        case MaterialCategory::slides: return "slides";
        case MaterialCategory::exercise: return "exercise";
        case MaterialCategory::example_code: return "example_code";
        case MaterialCategory::data: return "data";
    }
    return "data";
}

std::optional<MaterialCategory> parse_material_category(std::string_view s) {
    for (auto c : {MaterialCategory::slides, MaterialCategory::exercise, MaterialCategory::example_code,
                   MaterialCategory::data})
        if (to_string(c) == s) return c;
    return std::nullopt;
}

void to_json(json& j, const Material& m) {
    j = json{{"material_id", m.material_id},
             {"title", m.title},
             {"blob", m.blob.hash},
             {"size", m.blob.size},
             {"unlock_day", m.unlock_day},
             {"category", std::string(to_string(m.category))},
             {"file_name", m.file_name}};
}

void from_json(const json& j, Material& m) {
    j.at("material_id").get_to(m.material_id);
    m.title = j.value("title", "");
    j.at("blob").get_to(m.blob.hash);
    m.blob.size = j.value("size", std::uint64_t{0});
    m.unlock_day = j.value("unlock_day", std::int64_t{0});
    m.category = parse_material_category(j.value("category", "data")).value_or(MaterialCategory::data);
    m.file_name = j.value("file_name", "");
}

std::vector<Material> visible(std::span<const Material> all, std::int64_t day) {
    std::vector<Material> out;
    for (const auto& m : all)
        if (m.unlock_day <= day) out.push_back(m);
    std::stable_sort(out.begin(), out.end(), [](const Material& a, const Material& b) {
        return std::tie(a.unlock_day, a.title) < std::tie(b.unlock_day, b.title);
    });
    return out;
}

namespace {
constexpr std::int64_t kDayMs = 24LL * 3600 * 1000;
}

std::int64_t CourseCalendar::day_of(Timestamp t) const {
    auto ms = (t - start_).count();
    return ms < 0 ? 0 : ms / kDayMs;
}

Timestamp CourseCalendar::start_of_day(std::int64_t day) const { return start_ + std::chrono::milliseconds(day * kDayMs); }

std::optional<CourseCalendar> CourseCalendar::parse(std::string_view text) {
    if (text.size() == 10) {
        std::string full(text);
        full += "T00:00:00Z";
        if (auto t = parse_rfc3339(full)) return CourseCalendar(*t);
        return std::nullopt;
    }
    if (auto t = parse_rfc3339(text)) return CourseCalendar(*t);
    return std::nullopt;
}

Material MaterialCatalog::add(const std::string& material_id, const std::string& title, std::string_view bytes,
                              std::int64_t unlock_day, MaterialCategory category, const std::string& file_name) {
    if (material_id.empty()) throw InvalidArgument("material id must not be empty");
    if (unlock_day < 0) throw InvalidArgument("unlock_day must be >= 0");
    Material m;
    m.material_id = material_id;
    m.title = title.empty() ? material_id : title;
    m.blob = store_.blobs().put(bytes);
    m.unlock_day = unlock_day;
    m.category = category;
    m.file_name = file_name;
    store_.records().put(Collection::materials, material_id, json(m));
    return m;
}

bool MaterialCatalog::remove(const std::string& material_id) {
    return store_.records().remove(Collection::materials, material_id);
}

std::optional<Material> MaterialCatalog::get(const std::string& material_id) const {
    auto r = store_.records().get(Collection::materials, material_id);
    if (!r) return std::nullopt;
    return r->body.get<Material>();
}

std::vector<Material> MaterialCatalog::list() const {
    std::vector<Material> out;
    for (const auto& r : store_.records().list(Collection::materials)) out.push_back(r.body.get<Material>());
    return out;
}

std::vector<Material> MaterialCatalog::visible_on(std::int64_t day) const {
    auto all = list();
    return visible(all, day);
}

std::optional<std::string> MaterialCatalog::check_statement(const TaskSpec& task) const {
    if (task.statement_ref.empty()) return std::nullopt;
    auto m = get(task.statement_ref);
    if (!m) return "statement material '" + task.statement_ref + "' does not exist";
    if (m->unlock_day > task.unlock_day)
        return "statement material '" + task.statement_ref + "' unlocks on day " + std::to_string(m->unlock_day) +
               ", after the task (day " + std::to_string(task.unlock_day) + ")";
    return std::nullopt;
}

}  // namespace sae
