#include "tmtcg/harness/mock_server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

namespace tmtcg::harness {

namespace {

void send_all(int fd, ByteView bytes) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (n > 0) {
            sent += static_cast<std::size_t>(n);
        } else if (n < 0 && errno == EINTR) {
            continue;
        } else {
            return;
        }
    }
}

}  // namespace

MockServer::MockServer(std::shared_ptr<MockBroker> broker, const std::string& host, std::uint16_t port)
    : broker_(std::move(broker)) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (listen_fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(listen_fd_);
        throw std::runtime_error("not an IPv4 address: " + host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 256) < 0) {
        const std::string err = std::strerror(errno);
        ::close(listen_fd_);
        throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port) + ": " + err);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    acceptor_ = std::thread([this] { accept_loop(); });
}

MockServer::~MockServer() { stop(); }

void MockServer::stop() {
    if (stopping_.exchange(true)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    if (acceptor_.joinable()) acceptor_.join();
    ::close(listen_fd_);
    {
        std::lock_guard lock(mutex_);
        for (auto& [conn, fd] : sockets_) ::shutdown(fd, SHUT_RDWR);
    }
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(mutex_);
        workers.swap(workers_);
    }
    for (auto& t : workers) t.join();
}

void MockServer::accept_loop() {
    while (!stopping_) {
        pollfd p{listen_fd_, POLLIN, 0};
        if (::poll(&p, 1, 100) <= 0) continue;
        const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0) continue;
        auto conn = broker_->open();
        if (!conn) {
            ::close(fd);  // halted: refuse service
            continue;
        }
        std::lock_guard lock(mutex_);
        sockets_[*conn] = fd;
        workers_.emplace_back([this, c = *conn, fd] { serve(c, fd); });
    }
}

void MockServer::serve(ConnId conn, int fd) {
    std::uint8_t buf[16384];
    for (;;) {
        pollfd p{fd, POLLIN, 0};
        const int rc = ::poll(&p, 1, 200);
        if (stopping_) break;
        if (rc < 0 && errno != EINTR) break;
        if (rc <= 0) continue;
        const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        broker_->feed(conn, ByteView(buf, static_cast<std::size_t>(n)));
        flush();
    }
    broker_->close(conn);
    flush();
    std::lock_guard lock(mutex_);
    sockets_.erase(conn);
    write_closed_.erase(conn);
    ::close(fd);
}

void MockServer::flush() {
    std::lock_guard lock(mutex_);
    for (ConnId conn : broker_->dirty()) {
        auto it = sockets_.find(conn);
        auto pending = broker_->take(conn);
        if (it == sockets_.end()) continue;
        send_all(it->second, pending.bytes);
        if (pending.closed && !write_closed_[conn]) {
            // Half-close: the client sees EOF, and its remaining bytes are
            // still drained by serve() so the close never turns into a reset.
            ::shutdown(it->second, SHUT_WR);
            write_closed_[conn] = true;
        }
    }
}

}  // namespace tmtcg::harness
