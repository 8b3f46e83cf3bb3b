#include "tutor/http_server.hpp"

#include <deque>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "tutor/error.hpp"

namespace tutor {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

constexpr std::size_t kMaxBodyBytes = 64u << 20;

/// Returns the session id for /sessions/{id}/events, empty otherwise.
std::string events_session(std::string_view target) {
  constexpr std::string_view prefix = "/sessions/";
  constexpr std::string_view suffix = "/events";
  if (const auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
  if (!target.starts_with(prefix) || !target.ends_with(suffix)) return {};
  const auto id = target.substr(prefix.size(), target.size() - prefix.size() - suffix.size());
  if (id.empty() || id.find('/') != std::string_view::npos) return {};
  return std::string(id);
}

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, TutorService& service, std::string session_id)
      : ws_(std::move(socket)), service_(service), session_id_(std::move(session_id)) {}

  ~WsSession() {
    if (token_ != 0) service_.events().unsubscribe(token_);
  }

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    std::weak_ptr<WsSession> weak = shared_from_this();
    token_ = service_.events().subscribe(session_id_, [weak](const nlohmann::json& event) {
      if (auto self = weak.lock()) {
        net::post(self->ws_.get_executor(),
                  [self, msg = event.dump()]() mutable { self->enqueue(std::move(msg)); });
      }
    });
    do_read();
  }

  void do_read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      self->buffer_.consume(self->buffer_.size());
      self->do_read();
    });
  }

  void enqueue(std::string msg) {
    if (closed_) return;
    queue_.push_back(std::move(msg));
    if (queue_.size() == 1) do_write();
  }

  void do_write() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->do_write();
    });
  }

  void close() {
    closed_ = true;
    queue_.clear();
    if (token_ != 0) {
      service_.events().unsubscribe(token_);
      token_ = 0;
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  TutorService& service_;
  std::string session_id_;
  std::uint64_t token_ = 0;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  bool closed_ = false;
};

}  // namespace

struct HttpServer::Impl {
  Impl(TutorService& s, std::string addr, std::uint16_t p, unsigned io, unsigned workers_n)
      : service(s), address(std::move(addr)), requested_port(p), io_threads(io == 0 ? 1 : io),
        workers(workers_n == 0 ? 1 : workers_n), acceptor(ioc) {}

  void do_accept();

  TutorService& service;
  std::string address;
  std::uint16_t requested_port;
  unsigned io_threads;
  net::io_context ioc;
  net::thread_pool workers;
  tcp::acceptor acceptor;
  std::vector<std::thread> threads;
  std::uint16_t bound_port = 0;
  bool running = false;
};

namespace {

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, TutorService& service, net::thread_pool& workers)
      : stream_(std::move(socket)), service_(service), workers_(workers) {}

  void run() {
    net::dispatch(stream_.get_executor(), [self = shared_from_this()] { self->do_read(); });
  }

 private:
  void do_read() {
    parser_.emplace();
    parser_->body_limit(kMaxBodyBytes);
    stream_.expires_after(std::chrono::seconds(120));
    http::async_read(stream_, buffer_, *parser_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec == http::error::end_of_stream) {
      beast::error_code ignored;
      stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
      return;
    }
    if (ec) return;
    http::request<http::string_body> req = parser_->release();

    if (websocket::is_upgrade(req)) {
      const std::string id = events_session(std::string_view(req.target().data(), req.target().size()));
      bool known = false;
      if (!id.empty()) {
        try {
          service_.state(id);
          known = true;
        } catch (const Error&) {
        }
      }
      if (known) {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), service_, id)->run(std::move(req));
        return;
      }
      send(make_response(req, {404, {{"error", "SessionNotFound"}, {"message", std::string(req.target())}}}));
      return;
    }

    net::post(workers_, [self = shared_from_this(), req = std::move(req)]() mutable {
      const RestResponse r = handle_rest(self->service_, std::string(req.method_string()),
                                         std::string(req.target()), req.body());
      auto res = make_response(req, r);
      net::post(self->stream_.get_executor(),
                [self, res = std::move(res)]() mutable { self->send(std::move(res)); });
    });
  }

  static http::response<http::string_body> make_response(const http::request<http::string_body>& req,
                                                         const RestResponse& r) {
    http::response<http::string_body> res{static_cast<http::status>(r.status), req.version()};
    res.set(http::field::server, "tutor");
    res.set(http::field::content_type, "application/json");
    res.keep_alive(req.keep_alive());
    res.body() = r.body.dump();
    res.prepare_payload();
    return res;
  }

  void send(http::response<http::string_body> res) {
    auto msg = std::make_shared<http::response<http::string_body>>(std::move(res));
    stream_.expires_after(std::chrono::seconds(120));
    http::async_write(stream_, *msg, [self = shared_from_this(), msg](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!msg->keep_alive()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->do_read();
    });
  }

  beast::tcp_stream stream_;
  TutorService& service_;
  net::thread_pool& workers_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
};

}  // namespace

void HttpServer::Impl::do_accept() {
  acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
    if (ec == net::error::operation_aborted || !acceptor.is_open()) return;
    if (ec) {
      spdlog::warn("accept failed: {}", ec.message());
    } else {
      std::make_shared<HttpSession>(std::move(socket), service, workers)->run();
    }
    do_accept();
  });
}

HttpServer::HttpServer(TutorService& service, std::string bind_address, std::uint16_t port,
                       unsigned io_threads, unsigned worker_threads)
    : impl_(std::make_unique<Impl>(service, std::move(bind_address), port, io_threads, worker_threads)) {}

HttpServer::~HttpServer() { stop(); }

void HttpServer::start() {
  if (impl_->running) return;
  const tcp::endpoint endpoint{net::ip::make_address(impl_->address), impl_->requested_port};
  impl_->acceptor.open(endpoint.protocol());
  impl_->acceptor.set_option(net::socket_base::reuse_address(true));
  impl_->acceptor.bind(endpoint);
  impl_->acceptor.listen(net::socket_base::max_listen_connections);
  impl_->bound_port = impl_->acceptor.local_endpoint().port();
  impl_->do_accept();
  for (unsigned i = 0; i < impl_->io_threads; ++i) {
    impl_->threads.emplace_back([this] { impl_->ioc.run(); });
  }
  impl_->running = true;
  spdlog::info("listening on {}:{}", impl_->address, impl_->bound_port);
}

void HttpServer::stop() {
  if (!impl_ || !impl_->running) return;
  impl_->running = false;
  net::post(impl_->ioc, [this] {
    beast::error_code ignored;
    impl_->acceptor.close(ignored);
  });
  impl_->workers.join();
  impl_->ioc.stop();
  for (auto& t : impl_->threads) t.join();
  impl_->threads.clear();
}

std::uint16_t HttpServer::port() const { return impl_->bound_port; }

}  // namespace tutor
