#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "seedmix/atlas.hpp"
#include "seedmix/optimizer.hpp"

namespace seedmix {

struct ApiConfig {
  std::string bind = "127.0.0.1:8080";  // host:port; port 0 picks a free port
  std::filesystem::path atlas_path;
  std::optional<std::filesystem::path> static_dir;
};

// host:port; throws ArgumentError on a malformed address.
std::pair<std::string, int> parse_bind(std::string_view bind);

struct ApiRequest {
  std::string method = "GET";
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;

  std::string text() const { return body.dump(); }
};

// Problem-detail body {status, code, message}.
ApiResponse problem(int status, std::string_view code, std::string_view message);

// Routes requests against one immutable atlas. handle() is const and safe to
// call concurrently.
class AtlasService {
 public:
  explicit AtlasService(SolutionAtlas atlas);

  // Reads, parses and audits the atlas; throws on any failure.
  static AtlasService load(const std::filesystem::path& path);

  ApiResponse handle(const ApiRequest& request) const;
  const SolutionAtlas& atlas() const { return atlas_; }

 private:
  ApiResponse subregions() const;
  ApiResponse topk(const std::string& id, const ApiRequest& request) const;
  ApiResponse attributes() const;
  ApiResponse attribute(const std::string& name, const ApiRequest& request) const;
  ApiResponse common(const ApiRequest& request) const;
  ApiResponse differentiated(const ApiRequest& request) const;
  ApiResponse varieties(const ApiRequest& request) const;
  ApiResponse variety_members(const std::string& code) const;
  ApiResponse highlight(const ApiRequest& request) const;
  ApiResponse summary() const;

  SolutionAtlas atlas_;
  AverageDivisor divisor_;
  std::size_t histogram_bins_;
  std::map<VarietyId, std::size_t> topk_counts_;
  int first_year_ = 0;
  int last_year_ = 0;
};

// HTTP front end over an AtlasService, optionally hosting static files.
class HttpServer {
 public:
  HttpServer(const AtlasService& service, std::optional<std::filesystem::path> static_dir = {});
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and returns the bound port; throws IoError on failure.
  int bind(const std::string& host, int port);
  // Blocks until stop() is called.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace seedmix
