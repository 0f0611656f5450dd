#include "sedro/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <sstream>

namespace sedro::net {

namespace {

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

bool is_socket(int fd) {
  struct stat st {};
  return fstat(fd, &st) == 0 && S_ISSOCK(st.st_mode);
}

void set_nodelay(int fd) {
  int one = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

using Clock = std::chrono::steady_clock;

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
  return left < 0 ? 0 : static_cast<int>(left);
}

// Waits until fd is readable or the deadline passes.
void wait_readable(int fd, int timeout_ms, std::optional<Clock::time_point> deadline) {
  while (true) {
    pollfd p{fd, POLLIN, 0};
    const int t = deadline ? remaining_ms(*deadline) : timeout_ms;
    const int r = ::poll(&p, 1, deadline ? t : -1);
    if (r > 0) return;
    if (r == 0) throw TimeoutError("timed out after " + std::to_string(timeout_ms) + " ms waiting for data");
    if (errno != EINTR) throw IoError(errno_text("poll"));
  }
}

}  // namespace

Stream::Stream(int in_fd, int out_fd, bool owned)
    : in_(in_fd), out_(out_fd), owned_(owned), socket_(is_socket(out_fd)) {}

Stream::Stream(Stream&& o) noexcept : in_(o.in_), out_(o.out_), owned_(o.owned_), socket_(o.socket_) {
  o.in_ = o.out_ = -1;
  o.owned_ = false;
}

Stream& Stream::operator=(Stream&& o) noexcept {
  if (this != &o) {
    close();
    in_ = o.in_;
    out_ = o.out_;
    owned_ = o.owned_;
    socket_ = o.socket_;
    o.in_ = o.out_ = -1;
    o.owned_ = false;
  }
  return *this;
}

Stream::~Stream() { close(); }

void Stream::close() {
  if (owned_) {
    if (in_ >= 0) ::close(in_);
    if (out_ >= 0 && out_ != in_) ::close(out_);
  }
  in_ = out_ = -1;
  owned_ = false;
}

void Stream::write_all(std::span<const std::uint8_t> data) {
  if (out_ < 0) throw ClosedError("write on a closed stream");
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = socket_ ? ::send(out_, data.data() + done, data.size() - done, MSG_NOSIGNAL)
                           : ::write(out_, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EPIPE || errno == ECONNRESET) throw ClosedError("peer closed the connection");
      throw IoError(errno_text("write"));
    }
    done += static_cast<std::size_t>(n);
  }
}

void Stream::read_exact(std::span<std::uint8_t> out, int timeout_ms) {
  if (in_ < 0) throw ClosedError("read on a closed stream");
  std::optional<Clock::time_point> deadline;
  if (timeout_ms >= 0) deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
  std::size_t done = 0;
  while (done < out.size()) {
    wait_readable(in_, timeout_ms, deadline);
    const ssize_t n = ::read(in_, out.data() + done, out.size() - done);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      if (errno == ECONNRESET) throw ClosedError("connection reset by peer");
      throw IoError(errno_text("read"));
    }
    if (n == 0) {
      throw ClosedError(done == 0 ? "end of stream" : "end of stream after " + std::to_string(done) + " of " +
                                                           std::to_string(out.size()) + " bytes");
    }
    done += static_cast<std::size_t>(n);
  }
}

void write_frame(Stream& s, const proto::Frame& frame) { s.write_all(proto::encode_frame(frame)); }

proto::Frame read_frame(Stream& s, int timeout_ms) {
  Bytes buf(proto::kHeaderSize);
  s.read_exact(buf, timeout_ms);
  const std::size_t n = proto::payload_size_from_header(buf);
  buf.resize(proto::kHeaderSize + n);
  if (n > 0) s.read_exact(std::span(buf).subspan(proto::kHeaderSize), timeout_ms);
  return proto::decode_frame(buf);
}

Address parse_address(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
    throw ValidationError("listen", "expected host:port, got \"" + text + "\"");
  Address a;
  a.host = text.substr(0, colon);
  const std::string port = text.substr(colon + 1);
  try {
    std::size_t used = 0;
    const unsigned long p = std::stoul(port, &used);
    if (used != port.size() || p > 65535) throw std::out_of_range("port");
    a.port = static_cast<std::uint16_t>(p);
  } catch (const std::exception&) {
    throw ValidationError("listen", "bad port \"" + port + "\"");
  }
  return a;
}

namespace {

sockaddr_in resolve(const Address& addr) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(addr.port);
  const std::string host = addr.host == "localhost" ? "127.0.0.1" : addr.host;
  if (inet_pton(AF_INET, host.c_str(), &sa.sin_addr) == 1) return sa;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  addrinfo* res = nullptr;
  if (getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res)
    throw IoError("cannot resolve host \"" + addr.host + "\"");
  sa.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return sa;
}

}  // namespace

Listener Listener::bind(const Address& addr) {
  Listener l;
  l.fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (l.fd_ < 0) throw IoError(errno_text("socket"));
  int one = 1;
  setsockopt(l.fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in sa = resolve(addr);
  if (::bind(l.fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0)
    throw IoError(errno_text(("bind " + addr.host + ":" + std::to_string(addr.port)).c_str()));
  if (::listen(l.fd_, 8) != 0) throw IoError(errno_text("listen"));
  socklen_t len = sizeof sa;
  getsockname(l.fd_, reinterpret_cast<sockaddr*>(&sa), &len);
  l.port_ = ntohs(sa.sin_port);
  return l;
}

Listener::Listener(Listener&& o) noexcept : fd_(o.fd_), port_(o.port_) { o.fd_ = -1; }

Listener& Listener::operator=(Listener&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = o.fd_;
    port_ = o.port_;
    o.fd_ = -1;
  }
  return *this;
}

Listener::~Listener() {
  if (fd_ >= 0) ::close(fd_);
}

std::optional<Stream> Listener::accept(int timeout_ms) {
  try {
    std::optional<Clock::time_point> deadline;
    if (timeout_ms >= 0) deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
    wait_readable(fd_, timeout_ms, deadline);
  } catch (const TimeoutError&) {
    return std::nullopt;
  }
  const int fd = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
  if (fd < 0) throw IoError(errno_text("accept"));
  set_nodelay(fd);
  return Stream(fd, fd, true);
}

Stream connect_tcp(const Address& addr, int timeout_ms) {
  sockaddr_in sa = resolve(addr);
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC | SOCK_NONBLOCK, 0);
  if (fd < 0) throw IoError(errno_text("socket"));
  Stream guard(fd, fd, true);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
    if (errno != EINPROGRESS) throw IoError(errno_text(("connect " + addr.host + ":" + std::to_string(addr.port)).c_str()));
    pollfd p{fd, POLLOUT, 0};
    const int r = ::poll(&p, 1, timeout_ms);
    if (r == 0) throw TimeoutError("connect timed out");
    int err = 0;
    socklen_t len = sizeof err;
    getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (r < 0 || err != 0) {
      errno = err;
      throw IoError(errno_text(("connect " + addr.host + ":" + std::to_string(addr.port)).c_str()));
    }
  }
  fcntl(fd, F_SETFL, fcntl(fd, F_GETFL) & ~O_NONBLOCK);
  set_nodelay(fd);
  return guard;
}

Stream stdio_stream() { return Stream(STDIN_FILENO, STDOUT_FILENO, false); }

std::vector<std::string> split_command(const std::string& cmd) {
  std::istringstream in(cmd);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

Subprocess Subprocess::spawn(const std::vector<std::string>& argv) {
  if (argv.empty()) throw ValidationError("agent", "empty command");
  int to_child[2], from_child[2];
  if (pipe2(to_child, O_CLOEXEC) != 0) throw IoError(errno_text("pipe"));
  if (pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw IoError(errno_text("pipe"));
  }
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  const pid_t pid = fork();
  if (pid < 0) throw IoError(errno_text("fork"));
  if (pid == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    execvp(args[0], args.data());
    _exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  Subprocess p;
  p.pid_ = pid;
  p.stream_ = Stream(from_child[0], to_child[1], true);
  return p;
}

Subprocess::Subprocess(Subprocess&& o) noexcept : pid_(o.pid_), stream_(std::move(o.stream_)) { o.pid_ = -1; }

Subprocess::~Subprocess() {
  if (pid_ > 0) {
    stream_.close();
    ::kill(pid_, SIGTERM);
    waitpid(pid_, nullptr, 0);
  }
}

int Subprocess::wait() {
  stream_.close();
  if (pid_ <= 0) return -1;
  int status = 0;
  waitpid(pid_, &status, 0);
  pid_ = -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace sedro::net
