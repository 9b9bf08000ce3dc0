#pragma once

// Serves a ProviderSet over the provider wire protocol. Used as the mock
// server for conformance and client tests, and by `vcos serve-mock`.

#include <cstddef>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "vcos/protocol.hpp"
#include "vcos/providers.hpp"

namespace httplib {
class Server;
}

namespace vcos {

struct ServerOptions {
    std::size_t session_capacity = 4;  // LRU; evicted sessions answer 404
    std::size_t dedup_capacity = 256;  // cached responses keyed by X-Request-Id
};

class ProviderServer {
public:
    ProviderServer(ProviderSet providers, protocol::ServerCapabilities caps, ServerOptions options = {});
    ~ProviderServer();

    ProviderServer(const ProviderServer&) = delete;
    ProviderServer& operator=(const ProviderServer&) = delete;

    // Binds (port 0 picks a free port), starts the listener thread and returns the port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    // Blocks the caller until stop() is called from elsewhere.
    void listen_blocking(const std::string& host, int port);
    void stop();

    std::string base_url() const;
    int port() const { return port_; }
    std::size_t live_sessions() const;

private:
    struct Reply {
        int status = 200;
        std::string body;
    };

    void install_routes();
    Reply handle(const std::string& route, const std::string& body);
    Reply dispatch(const std::string& route, const std::string& body);

    ProviderSet providers_;
    protocol::ServerCapabilities caps_;
    ServerOptions options_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    std::string host_ = "127.0.0.1";
    int port_ = 0;

    // One inference at a time per model.
    std::mutex flow_mu_, detect_mu_, segment_mu_;

    mutable std::mutex session_mu_;
    std::list<std::string> session_lru_;  // front = most recent
    std::map<std::string, int> session_frames_;

    std::mutex dedup_mu_;
    std::list<std::string> dedup_order_;
    std::map<std::string, Reply> dedup_;
};

}  // namespace vcos
