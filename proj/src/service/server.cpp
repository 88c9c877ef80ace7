#include "imls/service/server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <sys/socket.h>

#include <condition_variable>
#include <deque>
#include <mutex>
#include <set>

#include "imls/log.hpp"
#include "imls/service/latest_slot.hpp"

namespace imls {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;

namespace {

http::response<http::string_body> json_response(const http::request<http::string_body>& req, http::status status,
                                                const json& body) {
    http::response<http::string_body> res{status, req.version()};
    res.set(http::field::content_type, "application/json");
    res.set(http::field::access_control_allow_origin, "*");
    res.keep_alive(req.keep_alive());
    res.body() = body.dump();
    res.prepare_payload();
    return res;
}

json error_body(const std::string& msg) { return {{"error", msg}}; }

/// Maps any handler failure to a status and message.
std::pair<http::status, std::string> classify(const std::exception& e) {
    if (const auto* se = dynamic_cast<const ServiceError*>(&e))
        return {static_cast<http::status>(se->status()), se->what()};
    if (dynamic_cast<const json::exception*>(&e)) return {http::status::bad_request, e.what()};
    return {http::status::internal_server_error, e.what()};
}

/// Streams renders for one WebSocket connection. Reads run on the connection's
/// io_context; renders run on a worker thread; one render is in flight at a time.
class ExploreSession : public std::enable_shared_from_this<ExploreSession> {
public:
    ExploreSession(const PipelineService& service, asio::io_context& ioc, tcp::socket socket)
        : service_(service), ioc_(ioc), ws_(std::move(socket)) {}

    void run(const http::request<http::string_body>& upgrade) {
        beast::error_code ec;
        ws_.accept(upgrade, ec);
        if (ec) return;
        worker_ = std::thread([self = shared_from_this()] { self->render_loop(); });
        do_read();
        ioc_.run();
        {
            std::lock_guard lock(write_mu_);
            closed_ = true;
        }
        write_cv_.notify_all();
        slot_.close();
        if (worker_.joinable()) worker_.join();
    }

private:
    asio::io_context& ioc() { return ioc_; }

    void do_read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
    }

    void on_read(beast::error_code ec) {
        if (ec) {
            slot_.close();
            return;
        }
        const std::string text = beast::buffers_to_string(buffer_.data());
        buffer_.consume(buffer_.size());
        try {
            slot_.put(RenderRequest::parse(json::parse(text)));
        } catch (const std::exception& e) {
            const auto [status, msg] = classify(e);
            enqueue({{"error", msg}, {"status", static_cast<int>(status)}}, {});
        }
        do_read();
    }

    void render_loop() {
        while (auto req = slot_.take()) {
            json meta;
            std::vector<std::uint8_t> png;
            try {
                auto res = service_.handle_render(*req);
                meta = res.to_json(false);
                png = std::move(res.image_png);
            } catch (const std::exception& e) {
                const auto [status, msg] = classify(e);
                meta = {{"error", msg}, {"status", static_cast<int>(status)}};
                if (req->seq) meta["seq"] = *req->seq;
            }
            meta["dropped"] = slot_.dropped();
            std::unique_lock lock(write_mu_);
            enqueue(std::move(meta), std::move(png));
            write_cv_.wait(lock, [&] { return pending_ == 0 || closed_; });
            if (closed_) break;
        }
    }

    /// Called from either thread; the write itself happens on the io thread.
    void enqueue(json meta, std::vector<std::uint8_t> png) {
        ++pending_;
        asio::post(ioc(), [self = shared_from_this(), meta = std::move(meta), png = std::move(png)]() mutable {
            self->outbox_.push_back({meta.dump(), false});
            if (!png.empty()) self->outbox_.push_back({std::string(png.begin(), png.end()), true});
            if (!self->writing_) self->write_next();
        });
    }

    void write_next() {
        if (outbox_.empty()) {
            writing_ = false;
            return;
        }
        writing_ = true;
        ws_.binary(outbox_.front().second);
        ws_.async_write(asio::buffer(outbox_.front().first), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            const bool binary_or_last = self->outbox_.front().second || self->outbox_.size() == 1 ||
                                        !self->outbox_[1].second;
            self->outbox_.pop_front();
            if (ec) {
                std::lock_guard lock(self->write_mu_);
                self->closed_ = true;
                self->write_cv_.notify_all();
                self->slot_.close();
                return;
            }
            if (binary_or_last) {
                std::lock_guard lock(self->write_mu_);
                if (self->pending_ > 0) --self->pending_;
                self->write_cv_.notify_all();
            }
            self->write_next();
        });
    }

    const PipelineService& service_;
    asio::io_context& ioc_;
    websocket::stream<tcp::socket> ws_;
    beast::flat_buffer buffer_;
    LatestSlot<RenderRequest> slot_;
    std::thread worker_;
    std::deque<std::pair<std::string, bool>> outbox_;
    bool writing_ = false;
    std::mutex write_mu_;
    std::condition_variable write_cv_;
    std::atomic<int> pending_{0};
    bool closed_ = false;
};

}  // namespace

struct Server::Impl {
    const PipelineService& service;
    asio::io_context ioc;
    tcp::acceptor acceptor;
    std::thread thread;
    std::atomic<bool> stopping{false};
    std::mutex sessions_mu;
    std::vector<std::thread> sessions;

    Impl(const PipelineService& s, const std::string& host, int port)
        : service(s), acceptor(ioc, tcp::endpoint(asio::ip::make_address(host), static_cast<unsigned short>(port))) {}

    std::set<tcp::socket::native_handle_type> open_handles;

    void forget(tcp::socket::native_handle_type h) {
        std::lock_guard lock(sessions_mu);
        open_handles.erase(h);
    }

    void handle_connection(tcp::socket socket) {
        const auto handle = socket.native_handle();
        beast::flat_buffer buffer;
        beast::error_code ec;
        while (!stopping) {
            http::request<http::string_body> req;
            http::read(socket, buffer, req, ec);
            if (ec) break;
            if (websocket::is_upgrade(req)) {
                if (req.target() != "/ws/explore") {
                    http::write(socket, json_response(req, http::status::not_found, error_body("no such endpoint")), ec);
                    break;
                }
                // Give the WebSocket its own io_context so reads and writes stay asynchronous.
                asio::io_context session_ioc;
                tcp::socket moved(session_ioc);
                const auto protocol = socket.local_endpoint(ec).protocol();
                moved.assign(protocol, socket.release(ec));
                std::make_shared<ExploreSession>(service, session_ioc, std::move(moved))->run(req);
                forget(handle);
                return;
            }
            auto res = route(req);
            http::write(socket, res, ec);
            if (ec || !res.keep_alive()) break;
        }
        socket.shutdown(tcp::socket::shutdown_send, ec);
        forget(handle);
    }

    http::response<http::string_body> route(const http::request<http::string_body>& req) {
        const auto target = std::string(req.target());
        try {
            if (target == "/api/catalog") {
                if (req.method() != http::verb::get)
                    return json_response(req, http::status::method_not_allowed, error_body("use GET"));
                return json_response(req, http::status::ok, service.handle_list());
            }
            if (target == "/api/render") {
                if (req.method() != http::verb::post)
                    return json_response(req, http::status::method_not_allowed, error_body("use POST"));
                json body;
                try {
                    body = json::parse(req.body());
                } catch (const json::parse_error& e) {
                    throw ServiceError(400, std::string("malformed JSON: ") + e.what());
                }
                return json_response(req, http::status::ok, service.handle_render(RenderRequest::parse(body)).to_json());
            }
            return json_response(req, http::status::not_found, error_body("no such endpoint: " + target));
        } catch (const std::exception& e) {
            const auto [status, msg] = classify(e);
            return json_response(req, status, error_body(msg));
        }
    }

    void accept_loop() {
        while (!stopping) {
            beast::error_code ec;
            tcp::socket socket(ioc);
            acceptor.accept(socket, ec);
            if (ec || stopping) break;
            std::lock_guard lock(sessions_mu);
            open_handles.insert(socket.native_handle());
            sessions.emplace_back([this, s = std::move(socket)]() mutable { handle_connection(std::move(s)); });
        }
    }
};

Server::Server(const PipelineService& service, const std::string& host, int port)
    : impl_(std::make_unique<Impl>(service, host, port)) {}

Server::~Server() { stop(); }

int Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::start() {
    impl_->thread = std::thread([this] { impl_->accept_loop(); });
}

void Server::run() {
    log_info(strprintf("listening on port %d", port()));
    impl_->accept_loop();
}

void Server::stop() {
    if (!impl_ || impl_->stopping.exchange(true)) return;
    beast::error_code ec;
    // Unblock accept() with a throwaway connection, then close.
    {
        asio::io_context tmp;
        tcp::socket poke(tmp);
        poke.connect(impl_->acceptor.local_endpoint(), ec);
    }
    if (impl_->thread.joinable()) impl_->thread.join();
    impl_->acceptor.close(ec);
    std::vector<std::thread> sessions;
    {
        std::lock_guard lock(impl_->sessions_mu);
        // Wake connections blocked in a read so their threads can finish.
        for (auto h : impl_->open_handles) ::shutdown(h, SHUT_RDWR);
        sessions.swap(impl_->sessions);
    }
    for (auto& t : sessions)
        if (t.joinable()) t.join();
}

}  // namespace imls
