#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>

namespace craml {

struct HttpRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
    std::string accept;
};

struct HttpResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

struct ServiceOptions {
    std::size_t preview_cap = 10000;  // chunks scanned by a rule preview
    std::size_t max_preview_limit = 500;
    std::size_t jobs = 1;
};

/// Projects are the subdirectories of `root` holding a `craml.json`
/// pipeline config; the directory name is the project id.
class Service {
public:
    explicit Service(std::filesystem::path root, ServiceOptions options = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    HttpResponse handle(const HttpRequest& request);

    /// Blocks until background jobs finish.
    void wait_idle();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string openapi_json();

/// Serves until the process is stopped.
void serve(Service& service, const std::string& host, int port);

}  // namespace craml
