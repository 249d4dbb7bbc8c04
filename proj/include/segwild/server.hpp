// Copyright Contributors to the segwild project
// SPDX-License-Identifier: Apache-2.0
//
// HTTP/JSON service over the pipeline. Every request names a session
// ("session" query parameter or JSON field, default "default"). Reads share
// a session; load, train, segment and export take it exclusively. Errors are
// returned as {"error": {"code", "message"}} with a matching HTTP status.
//
//   GET  /health                       {status, version}
//   GET  /session?session=             session state
//   POST /scene/load                   {path, cameras?: {id: path}}
//   POST /cameras                      {id, camera}
//   GET  /render                       camera=id | pose=<camera JSON>,
//                                      mode=color|feature_pca|depth|overlay,
//                                      segmentation=id (overlay), deadline_ms?
//                                      -> PNG, 504 past the deadline
//   POST /prompts                      {camera, points, id?}
//   POST /masks                        raw PNG body -> {mask_id}
//   POST /segment                      {prompt_set, tau?, use_sgc?, mask_source?:
//                                      bitmap (mask_id) | mask_bank (path) |
//                                      polygon (vertices) | none}
//   GET  /segmentation/{id}/mask.png   camera=id (defaults to the prompt view)
//   GET  /segmentation/{id}.json
//   POST /export                       {segmentation, path}
//   POST /train                        {views, config?} -> background job
//   GET  /train/status
//   POST /train/cancel
//   GET  /metrics                      counters; segmentation+camera+gt adds IoU/Acc
//
// File paths in requests resolve inside the data root and may not escape it.
//
#pragma once

#include <segwild/sgc.hpp>

#include <filesystem>
#include <memory>
#include <string>

namespace segwild {

struct ServerConfig {
    std::string host = "127.0.0.1";
    /// 0 binds an ephemeral port.
    int port = 8080;
    std::filesystem::path dataRoot = ".";
    int renderDeadlineMs = 10000;
    double defaultTau    = kDefaultTau;
    SgcConfig sgc;
    unsigned threads = 0;

    /// Starts from defaults, then applies SEGWILD_DATA_ROOT and SEGWILD_PORT.
    static ServerConfig fromEnvironment();
    /// Keys: host, port, data_root, render_deadline_ms, tau, sgc_samples,
    /// sgc_drop_ratio, threads. Missing keys keep `base` values.
    static ServerConfig fromJson(const nlohmann::json &j, ServerConfig base);
    static ServerConfig fromJson(const nlohmann::json &j) { return fromJson(j, ServerConfig()); }
};

class Server {
  public:
    explicit Server(ServerConfig config);
    ~Server();
    Server(const Server &)            = delete;
    Server &operator=(const Server &) = delete;

    /// Binds the socket; returns the bound port. Throws Io on failure.
    int bind();
    /// Serves until stop(); binds first if needed.
    void listen();
    /// Blocks until a concurrent listen() is accepting; stop() before that
    /// point would be lost.
    void waitUntilReady() const;
    void stop();
    int port() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> mImpl;
};

} // namespace segwild
