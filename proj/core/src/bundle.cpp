#include "sae/bundle.hpp"

#include "sae/error.hpp"
#include "sae/keyvalue.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace sae {

namespace fs = std::filesystem;

namespace {
std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}
}  // namespace

Bundle parse_bundle(std::string_view archive) {
    auto entries = read_tar(archive);
    auto manifest = std::find_if(entries.begin(), entries.end(),
                                 [](const TarEntry& e) { return e.path == kBundleManifestName; });
    if (manifest == entries.end()) throw InvalidArgument("bundle: missing BUNDLE manifest");

    auto parsed = parse_kv(manifest->data);
    if (!parsed.errors.empty()) throw InvalidArgument("bundle manifest: " + parsed.errors.front().to_string());
    const auto* id = parsed.document.root.find("id");
    const auto* install = parsed.document.root.find("install_path");
    if (!id || id->value.empty()) throw InvalidArgument("bundle manifest: missing id");
    if (!install || install->value.empty() || install->value.front() != '/')
        throw InvalidArgument("bundle manifest: install_path must be absolute");
    for (const auto& part : fs::path(install->value))
        if (part == "..") throw InvalidArgument("bundle manifest: install_path must not contain '..'");

    Bundle b;
    b.id = id->value;
    b.install_path = fs::path(install->value).lexically_normal().string();
    for (auto& e : entries) {
        if (e.path.starts_with("files/") && e.path.size() > 6) {
            e.path.erase(0, 6);
            b.files.push_back(std::move(e));
        }
    }
    return b;
}

std::string pack_bundle_dir(const fs::path& dir) {
    std::vector<TarEntry> entries;
    entries.push_back({std::string(kBundleManifestName), slurp(dir / kBundleManifestName)});
    std::vector<fs::path> payload;
    if (fs::is_directory(dir / "files")) {
        for (const auto& e : fs::recursive_directory_iterator(dir / "files"))
            if (e.is_regular_file()) payload.push_back(e.path());
    }
    std::sort(payload.begin(), payload.end());
    for (const auto& p : payload) {
        auto perms = fs::status(p).permissions();
        bool exec = (perms & fs::perms::owner_exec) != fs::perms::none;
        entries.push_back({fs::relative(p, dir).generic_string(), slurp(p), exec ? 0755u : 0644u});
    }
    auto archive = write_tar(entries);
    parse_bundle(archive);  // reject a malformed manifest at pack time, not on a worker
    return archive;
}

std::optional<Bundle> BundleRegistry::find(const std::string& id) const {
    if (!dir_ || id.empty() || id.find('/') != std::string::npos || id.starts_with(".")) return std::nullopt;
    auto path = *dir_ / (id + ".tar");
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) return std::nullopt;
    auto bundle = parse_bundle(slurp(path));
    if (bundle.id != id) throw InvalidArgument("bundle " + path.string() + " declares id '" + bundle.id + "'");
    return bundle;
}

}  // namespace sae
