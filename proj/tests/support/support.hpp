#pragma once

// Shared helpers for unit and acceptance tests.

#include "sae/bundle.hpp"
#include "sae/model.hpp"
#include "sae/store.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <thread>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sae::test {

namespace fs = std::filesystem;

inline fs::path fixtures() { return SAE_FIXTURES_DIR; }

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const fs::path& p, std::string_view data) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

class TempDir {
public:
    TempDir() {
        std::string templ = (fs::temp_directory_path() / "sae-test-XXXXXX").string();
        if (!::mkdtemp(templ.data())) throw std::runtime_error("mkdtemp failed");
        path_ = templ;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

inline LanguageProfile python_language() {
    LanguageProfile l;
    l.profile_id = "python3";
    l.display_name = "Python 3 / CPython";
    l.source_suffix = ".py";
    l.run_command = "python3 {main}";
    return l;
}

struct CaseSpec {
    std::string id;
    std::string stdin_data;
    std::string expected;
    Weight weight{1, 1};
    std::vector<std::string> args = {};
};

/// Single-slot ("main") Python task whose blobs are written to `blobs`.
inline TaskSpec python_task(BlobStore& blobs, const std::string& id, const std::vector<CaseSpec>& cases,
                            SandboxPolicy sandbox = {}) {
    TaskSpec t;
    t.task_id = id;
    t.title = id;
    t.file_slots = {"main"};
    t.languages = {python_language()};
    t.sandbox = std::move(sandbox);
    for (const auto& c : cases) {
        TestCase tc;
        tc.case_id = c.id;
        tc.stdin_ref = blobs.put(c.stdin_data).hash;
        tc.expected_ref = blobs.put(c.expected).hash;
        tc.weight = c.weight;
        tc.args = c.args;
        t.test_cases.push_back(std::move(tc));
    }
    return t;
}

/// Packs the fixture bundles into `<dir>/<id>.tar`.
inline void pack_fixture_bundles(const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& entry : fs::directory_iterator(fixtures() / "bundles")) {
        auto archive = pack_bundle_dir(entry.path());
        spit(dir / (parse_bundle(archive).id + ".tar"), archive);
    }
}

inline std::map<std::string, std::string> solution_files(const fs::path& dir, const std::vector<std::string>& slots,
                                                         const std::string& suffix = ".py") {
    std::map<std::string, std::string> files;
    for (const auto& slot : slots) files[slot] = slurp(dir / (slot + suffix));
    return files;
}

/// Answers "pong" to anything on one loopback TCP and UDP port.
class PongServer {
public:
    PongServer() {
        tcp_ = ::socket(AF_INET, SOCK_STREAM, 0);
        int one = 1;
        ::setsockopt(tcp_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        if (::bind(tcp_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(tcp_, 16) != 0)
            throw std::runtime_error("PongServer: tcp bind failed");
        socklen_t len = sizeof addr;
        ::getsockname(tcp_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
        udp_ = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (::bind(udp_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
            throw std::runtime_error("PongServer: udp bind failed");
        thread_ = std::thread([this] { serve(); });
    }
    ~PongServer() {
        stop_ = true;
        thread_.join();
        ::close(tcp_);
        ::close(udp_);
    }
    int port() const { return port_; }
    int tcp_hits() const { return tcp_hits_; }
    std::string address() const { return "127.0.0.1 " + std::to_string(port_); }

private:
    void serve() {
        while (!stop_) {
            pollfd fds[2] = {{tcp_, POLLIN, 0}, {udp_, POLLIN, 0}};
            if (::poll(fds, 2, 50) <= 0) continue;
            if (fds[0].revents & POLLIN) {
                int c = ::accept(tcp_, nullptr, nullptr);
                if (c >= 0) {
                    ++tcp_hits_;
                    char buf[64];
                    pollfd p{c, POLLIN, 0};
                    if (::poll(&p, 1, 1000) > 0 && ::read(c, buf, sizeof buf) > 0) (void)!::write(c, "pong\n", 5);
                    ::close(c);
                }
            }
            if (fds[1].revents & POLLIN) {
                char buf[64];
                sockaddr_in from{};
                socklen_t len = sizeof from;
                if (::recvfrom(udp_, buf, sizeof buf, 0, reinterpret_cast<sockaddr*>(&from), &len) > 0)
                    ::sendto(udp_, "pong", 4, 0, reinterpret_cast<sockaddr*>(&from), len);
            }
        }
    }

    int tcp_ = -1, udp_ = -1, port_ = 0;
    std::atomic<int> tcp_hits_{0};
    std::atomic<bool> stop_{false};
    std::thread thread_;
};

}  // namespace sae::test
