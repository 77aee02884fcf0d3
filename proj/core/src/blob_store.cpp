#include "sae/error.hpp"
#include "sae/hash.hpp"
#include "sae/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sae {

namespace fs = std::filesystem;

namespace {

void write_all(int fd, std::string_view data, const fs::path& where) {
    while (!data.empty()) {
        ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError("write " + where.string() + ": " + std::strerror(errno));
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

void fsync_dir(const fs::path& dir) {
    int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
    if (fd >= 0) {
        ::fsync(fd);
        ::close(fd);
    }
}

}  // namespace

BlobStore::BlobStore(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_ / "tmp", ec);
    if (ec) throw IoError("cannot create blob directory " + root_.string() + ": " + ec.message());
}

fs::path BlobStore::path_for(const std::string& hash) const {
    if (hash.size() != 64 || hash.find_first_not_of("0123456789abcdef") != std::string::npos)
        throw NotFound("malformed blob id '" + hash + "'");
    return root_ / hash.substr(0, 2) / hash;
}

BlobRef BlobStore::put(std::string_view bytes) {
    BlobRef ref{sha256_hex(bytes), bytes.size()};
    auto final_path = path_for(ref.hash);
    std::error_code ec;
    if (fs::exists(final_path, ec)) return ref;

    fs::create_directories(final_path.parent_path(), ec);
    auto tmp = root_ / "tmp" / (ref.hash + "." + random_hex(6));
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
    if (fd < 0) throw IoError("create " + tmp.string() + ": " + std::strerror(errno));
    try {
        write_all(fd, bytes, tmp);
        if (::fsync(fd) != 0) throw IoError("fsync " + tmp.string() + ": " + std::strerror(errno));
    } catch (...) {
        ::close(fd);
        ::unlink(tmp.c_str());
        throw;
    }
    ::close(fd);
    if (::rename(tmp.c_str(), final_path.c_str()) != 0) {
        int err = errno;
        ::unlink(tmp.c_str());
        throw IoError("rename into " + final_path.string() + ": " + std::strerror(err));
    }
    fsync_dir(final_path.parent_path());
    return ref;
}

std::string BlobStore::get(const std::string& hash) const {
    auto p = path_for(hash);
    std::ifstream in(p, std::ios::binary);
    if (!in) throw NotFound("blob " + hash + " not found");
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

bool BlobStore::contains(const std::string& hash) const {
    try {
        std::error_code ec;
        return fs::is_regular_file(path_for(hash), ec);
    } catch (const NotFound&) {
        return false;
    }
}

std::optional<std::uint64_t> BlobStore::size(const std::string& hash) const {
    if (!contains(hash)) return std::nullopt;
    std::error_code ec;
    auto n = fs::file_size(path_for(hash), ec);
    if (ec) return std::nullopt;
    return n;
}

}  // namespace sae
