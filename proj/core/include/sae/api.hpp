#pragma once

// HTTP/1.1 JSON interface. Endpoint schemas are documented in docs/api.md.

#include "sae/service.hpp"

#include <chrono>
#include <memory>
#include <string>
#include <vector>

namespace sae {

/// "H:MM:SS" with unbounded hours, e.g. "76256:27:04".
std::string format_hms(std::chrono::milliseconds d);

/// Human label shown next to a status, e.g. "Evaluated".
std::string status_label(SubmissionStatus s);

struct RouteInfo {
    std::string method;
    std::string pattern;  // `{id}` marks a path parameter
    bool teacher_only = false;
};

class ApiServer {
public:
    explicit ApiServer(Service& service);
    ~ApiServer();
    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds the listening socket; port 0 picks a free port. Returns the port.
    int bind(const std::string& host, int port);
    /// Serves on a background thread (after bind).
    void start();
    /// Serves on the calling thread until stop().
    void run();
    void stop();
    int port() const;

    static const std::vector<RouteInfo>& routes();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace sae
