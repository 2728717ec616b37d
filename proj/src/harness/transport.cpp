#include "tmtcg/harness/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

namespace tmtcg::harness {

namespace {

class EmbeddedTransport final : public Transport {
public:
    EmbeddedTransport(std::shared_ptr<MockBroker> broker, ConnId conn) : broker_(std::move(broker)), conn_(conn) {}
    ~EmbeddedTransport() override { close(); }

    bool write(ByteView bytes) override {
        if (closed_) return false;
        broker_->feed(conn_, bytes);
        return true;
    }

    Chunk read(std::int64_t) override {
        if (closed_) return {{}, true};
        auto pending = broker_->take(conn_);
        return {std::move(pending.bytes), pending.closed};
    }

    void close() override {
        if (closed_) return;
        closed_ = true;
        broker_->close(conn_);
    }

    bool instant() const override { return true; }

private:
    std::shared_ptr<MockBroker> broker_;
    ConnId conn_;
    bool closed_ = false;
};

std::int64_t steady_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

int poll_one(int fd, short events, std::int64_t wait_ms) {
    pollfd p{fd, events, 0};
    for (;;) {
        const int rc = ::poll(&p, 1, static_cast<int>(std::max<std::int64_t>(wait_ms, 0)));
        if (rc < 0 && errno == EINTR) continue;
        return rc;
    }
}

class TcpTransport final : public Transport {
public:
    TcpTransport(int fd, std::int64_t close_wait_ms) : fd_(fd), close_wait_ms_(close_wait_ms) {}
    ~TcpTransport() override { close(); }

    bool write(ByteView bytes) override {
        if (fd_ < 0 || write_failed_) return false;
        std::size_t sent = 0;
        while (sent < bytes.size()) {
            const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
            if (n > 0) {
                sent += static_cast<std::size_t>(n);
                continue;
            }
            if (n < 0 && errno == EINTR) continue;
            if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
                if (poll_one(fd_, POLLOUT, 5000) > 0) continue;
            }
            write_failed_ = true;
            return false;
        }
        return true;
    }

    Chunk read(std::int64_t wait_ms) override {
        Chunk out;
        if (fd_ < 0 || peer_closed_) {
            out.closed = true;
            return out;
        }
        if (poll_one(fd_, POLLIN, wait_ms) <= 0) return out;
        std::uint8_t buf[16384];
        for (;;) {
            const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
            if (n > 0) {
                out.bytes.insert(out.bytes.end(), buf, buf + n);
                if (static_cast<std::size_t>(n) < sizeof buf) break;
                continue;
            }
            if (n < 0 && errno == EINTR) continue;
            if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) break;
            peer_closed_ = true;  // EOF or reset
            out.closed = true;
            break;
        }
        return out;
    }

    void close() override {
        if (fd_ < 0) return;
        if (!peer_closed_) {
            ::shutdown(fd_, SHUT_WR);
            const auto deadline = steady_ms() + close_wait_ms_;
            std::uint8_t buf[4096];
            while (steady_ms() < deadline) {
                if (poll_one(fd_, POLLIN, deadline - steady_ms()) <= 0) break;
                const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
                if (n > 0 || (n < 0 && (errno == EINTR || errno == EAGAIN))) continue;
                break;
            }
        }
        ::close(fd_);
        fd_ = -1;
    }

    bool instant() const override { return false; }

private:
    int fd_;
    std::int64_t close_wait_ms_;
    bool peer_closed_ = false;
    bool write_failed_ = false;
};

int connect_with_timeout(const std::string& host, std::uint16_t port, std::int64_t timeout_ms) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const auto service = std::to_string(port);
    if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0) return -1;

    int result = -1;
    for (addrinfo* ai = res; ai != nullptr && result < 0; ai = ai->ai_next) {
        const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_NONBLOCK | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0) continue;
        int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
        if (rc < 0 && errno == EINPROGRESS) {
            if (poll_one(fd, POLLOUT, timeout_ms) > 0) {
                int err = 0;
                socklen_t len = sizeof err;
                ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
                rc = err == 0 ? 0 : -1;
            }
        }
        if (rc == 0) {
            result = fd;
        } else {
            ::close(fd);
        }
    }
    ::freeaddrinfo(res);
    return result;
}

}  // namespace

std::unique_ptr<Transport> EmbeddedEndpoint::connect() {
    auto conn = broker_->open();
    if (!conn) return nullptr;
    return std::make_unique<EmbeddedTransport>(broker_, *conn);
}

TcpEndpoint::TcpEndpoint(std::string host, std::uint16_t port, std::int64_t connect_timeout_ms,
                         std::int64_t close_wait_ms)
    : host_(std::move(host)), port_(port), connect_timeout_ms_(connect_timeout_ms), close_wait_ms_(close_wait_ms) {}

std::unique_ptr<Transport> TcpEndpoint::connect() {
    const int fd = connect_with_timeout(host_, port_, connect_timeout_ms_);
    if (fd < 0) return nullptr;
    return std::make_unique<TcpTransport>(fd, close_wait_ms_);
}

std::string TcpEndpoint::descriptor() const { return "tcp:" + host_ + ":" + std::to_string(port_); }

}  // namespace tmtcg::harness
