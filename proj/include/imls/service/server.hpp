#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "imls/service/service.hpp"

namespace imls {

/// HTTP + WebSocket front end on one port:
///   GET  /api/catalog   -> handle_list()
///   POST /api/render    -> handle_render() as JSON with a base64 PNG
///   WS   /ws/explore    -> per view frame: a JSON text frame, then the PNG as a binary frame
/// One thread per connection. On the WebSocket only the newest pending view is
/// rendered; older ones are dropped.
class Server {
public:
    /// Binds immediately; port 0 picks a free port.
    Server(const PipelineService& service, const std::string& host, int port);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    [[nodiscard]] int port() const;
    /// Accept loop on a background thread.
    void start();
    /// Accept loop on the calling thread until stop().
    void run();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace imls
