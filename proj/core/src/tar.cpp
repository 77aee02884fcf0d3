#include "sae/tar.hpp"

#include "sae/error.hpp"

#include <array>
#include <cstdio>
#include <cstring>

namespace sae {

namespace {

constexpr std::size_t kBlock = 512;

struct Header {
    char name[100];
    char mode[8];
    char uid[8];
    char gid[8];
    char size[12];
    char mtime[12];
    char chksum[8];
    char typeflag;
    char linkname[100];
    char magic[6];
    char version[2];
    char uname[32];
    char gname[32];
    char devmajor[8];
    char devminor[8];
    char prefix[155];
    char pad[12];
};
static_assert(sizeof(Header) == kBlock);

void put_octal(char* field, std::size_t width, std::uint64_t value) {
    // width-1 digits, zero padded, NUL terminated
    std::snprintf(field, width, "%0*llo", static_cast<int>(width - 1), static_cast<unsigned long long>(value));
}

std::uint64_t get_octal(const char* field, std::size_t width) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) {
        char c = field[i];
        if (c == 0 || c == ' ') {
            if (v == 0 && c == ' ') continue;
            break;
        }
        if (c < '0' || c > '7') throw InvalidArgument("tar: bad octal field");
        v = v * 8 + static_cast<std::uint64_t>(c - '0');
    }
    return v;
}

unsigned checksum(const Header& h) {
    Header copy = h;
    std::memset(copy.chksum, ' ', sizeof copy.chksum);
    const auto* bytes = reinterpret_cast<const unsigned char*>(&copy);
    unsigned sum = 0;
    for (std::size_t i = 0; i < kBlock; ++i) sum += bytes[i];
    return sum;
}

void check_path(std::string_view path) {
    if (path.empty() || path.front() == '/') throw InvalidArgument("tar: unsafe path '" + std::string(path) + "'");
    std::size_t pos = 0;
    while (pos <= path.size()) {
        auto next = path.find('/', pos);
        auto part = path.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
        if (part == "..") throw InvalidArgument("tar: unsafe path '" + std::string(path) + "'");
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
}

}  // namespace

std::string write_tar(std::span<const TarEntry> entries) {
    std::string out;
    for (const auto& e : entries) {
        check_path(e.path);
        Header h{};
        if (e.path.size() <= sizeof h.name) {
            std::memcpy(h.name, e.path.data(), e.path.size());
        } else {
            auto split = e.path.rfind('/', sizeof h.prefix);
            if (split == std::string::npos || e.path.size() - split - 1 > sizeof h.name)
                throw InvalidArgument("tar: path too long '" + e.path + "'");
            std::memcpy(h.prefix, e.path.data(), split);
            std::memcpy(h.name, e.path.data() + split + 1, e.path.size() - split - 1);
        }
        put_octal(h.mode, sizeof h.mode, e.mode & 07777);
        put_octal(h.uid, sizeof h.uid, 0);
        put_octal(h.gid, sizeof h.gid, 0);
        put_octal(h.size, sizeof h.size, e.data.size());
        put_octal(h.mtime, sizeof h.mtime, 0);
        h.typeflag = '0';
        std::memcpy(h.magic, "ustar", 6);
        std::memcpy(h.version, "00", 2);
        std::snprintf(h.chksum, sizeof h.chksum, "%06o", checksum(h));
        h.chksum[7] = ' ';

        out.append(reinterpret_cast<const char*>(&h), kBlock);
        out += e.data;
        out.append((kBlock - e.data.size() % kBlock) % kBlock, '\0');
    }
    out.append(2 * kBlock, '\0');
    return out;
}

std::vector<TarEntry> read_tar(std::string_view archive) {
    std::vector<TarEntry> entries;
    std::size_t off = 0;
    static const std::array<char, kBlock> zero{};
    while (off + kBlock <= archive.size()) {
        if (std::memcmp(archive.data() + off, zero.data(), kBlock) == 0) return entries;
        Header h;
        std::memcpy(&h, archive.data() + off, kBlock);
        off += kBlock;
        if (get_octal(h.chksum, sizeof h.chksum) != checksum(h)) throw InvalidArgument("tar: header checksum mismatch");
        auto size = get_octal(h.size, sizeof h.size);
        if (size > archive.size() - off) throw InvalidArgument("tar: truncated entry");

        std::string name(h.name, strnlen(h.name, sizeof h.name));
        std::string prefix(h.prefix, strnlen(h.prefix, sizeof h.prefix));
        if (std::memcmp(h.magic, "ustar", 5) == 0 && !prefix.empty()) name = prefix + "/" + name;

        if (h.typeflag == '0' || h.typeflag == '\0') {
            check_path(name);
            TarEntry e;
            e.path = std::move(name);
            e.data.assign(archive.data() + off, size);
            e.mode = static_cast<std::uint32_t>(get_octal(h.mode, sizeof h.mode));
            entries.push_back(std::move(e));
        } else if (h.typeflag != '5') {
            throw InvalidArgument("tar: unsupported entry type for '" + name + "'");
        }
        off += (size + kBlock - 1) / kBlock * kBlock;
    }
    throw InvalidArgument("tar: missing end-of-archive marker");
}

}  // namespace sae
