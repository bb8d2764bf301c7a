#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <system_error>

#include "shoggoth/transport.hpp"

namespace shoggoth::transport {

namespace {

[[noreturn]] void fail(const char* what) { throw std::system_error(errno, std::generic_category(), what); }

void set_nonblocking(int fd) {
  const int flags = ::fcntl(fd, F_GETFL, 0);
  if (flags < 0 || ::fcntl(fd, F_SETFL, flags | O_NONBLOCK) < 0) fail("fcntl");
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

SocketLink::SocketLink(double latency_s) : Link(latency_s) {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) fail("socket");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  socklen_t len = sizeof addr;
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listener, 1) < 0 ||
      ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len) < 0) {
    ::close(listener);
    fail("listen");
  }
  fds_[0] = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fds_[0] < 0 || ::connect(fds_[0], reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
    ::close(listener);
    fail("connect");
  }
  fds_[1] = ::accept(listener, nullptr, nullptr);
  ::close(listener);
  if (fds_[1] < 0) fail("accept");
  set_nonblocking(fds_[0]);
  set_nonblocking(fds_[1]);

  ends_[static_cast<int>(Direction::kUp)].write_fd = fds_[0];
  ends_[static_cast<int>(Direction::kUp)].read_fd = fds_[1];
  ends_[static_cast<int>(Direction::kDown)].write_fd = fds_[1];
  ends_[static_cast<int>(Direction::kDown)].read_fd = fds_[0];
}

SocketLink::~SocketLink() {
  for (int fd : fds_) {
    if (fd >= 0) ::close(fd);
  }
}

std::size_t SocketLink::in_flight() const {
  std::size_t n = 0;
  for (const auto& ep : ends_) n += ep.sent.size() + ep.parsed.size();
  return n;
}

void SocketLink::transmit(Direction dir, const Pending& p, std::vector<std::uint8_t> bytes) {
  Endpoint& ep = ends_[static_cast<int>(dir)];
  ep.outbox.insert(ep.outbox.end(), bytes.begin(), bytes.end());
  ep.sent.push_back(p);
  pump(ep, false);
}

void SocketLink::pump(Endpoint& ep, bool block) {
  for (;;) {
    bool progress = false;
    if (ep.outbox_pos < ep.outbox.size()) {
      const ssize_t n = ::send(ep.write_fd, ep.outbox.data() + ep.outbox_pos, ep.outbox.size() - ep.outbox_pos,
                               MSG_NOSIGNAL);
      if (n > 0) {
        ep.outbox_pos += static_cast<std::size_t>(n);
        progress = true;
        if (ep.outbox_pos == ep.outbox.size()) {
          ep.outbox.clear();
          ep.outbox_pos = 0;
        }
      } else if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) {
        fail("send");
      }
    }

    std::uint8_t buf[65536];
    const ssize_t got = ::recv(ep.read_fd, buf, sizeof buf, 0);
    if (got > 0) {
      ep.inbox.insert(ep.inbox.end(), buf, buf + got);
      progress = true;
    } else if (got == 0) {
      throw std::system_error(ECONNRESET, std::generic_category(), "peer closed");
    } else if (errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) {
      fail("recv");
    }

    std::size_t pos = 0;
    while (ep.inbox.size() - pos >= kHeaderSize && !ep.sent.empty()) {
      const std::span<const std::uint8_t> rest(ep.inbox.data() + pos, ep.inbox.size() - pos);
      const std::size_t len = framed_length(rest);
      if (rest.size() < len) break;
      ep.parsed.emplace_back(ep.sent.front(), std::vector<std::uint8_t>(rest.begin(), rest.begin() + len));
      ep.sent.erase(ep.sent.begin());
      pos += len;
    }
    ep.inbox.erase(ep.inbox.begin(), ep.inbox.begin() + static_cast<std::ptrdiff_t>(pos));

    if (!block || ep.sent.empty()) return;
    if (!progress) {
      pollfd fds[2] = {{ep.read_fd, POLLIN, 0}, {ep.write_fd, POLLOUT, 0}};
      const nfds_t count = ep.outbox_pos < ep.outbox.size() ? 2 : 1;
      if (::poll(fds, count, 5000) == 0) {
        throw std::system_error(ETIMEDOUT, std::generic_category(), "socket link stalled");
      }
    }
  }
}

std::vector<std::pair<Link::Pending, std::vector<std::uint8_t>>> SocketLink::collect(Direction dir, double now) {
  Endpoint& ep = ends_[static_cast<int>(dir)];
  // Everything due must be read back off the wire before it can be handed out.
  while (std::any_of(ep.sent.begin(), ep.sent.end(), [now](const Pending& p) { return p.due <= now; })) {
    pump(ep, true);
  }
  std::vector<std::pair<Pending, std::vector<std::uint8_t>>> out;
  auto keep = ep.parsed.begin();
  for (auto it = ep.parsed.begin(); it != ep.parsed.end(); ++it) {
    if (it->first.due <= now) {
      out.push_back(std::move(*it));
    } else {
      if (keep != it) *keep = std::move(*it);
      ++keep;
    }
  }
  ep.parsed.erase(keep, ep.parsed.end());
  return out;
}

}  // namespace shoggoth::transport
