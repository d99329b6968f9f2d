// Copyright 2026 The lobstr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <cstring>
#include <string>

#include "lobstr/error.hpp"
#include "lobstr/runtime.hpp"

namespace lobstr {

namespace {

std::string errno_text(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

/// Reads exactly n bytes; false on EOF, a short read, or a socket error.
bool read_full(int fd, uint8_t* buf, size_t n) {
  size_t got = 0;
  while (got < n) {
    ssize_t k = ::recv(fd, buf + got, n - got, 0);
    if (k <= 0) {
      if (k < 0 && errno == EINTR) continue;
      return false;
    }
    got += static_cast<size_t>(k);
  }
  return true;
}

bool write_full(int fd, const uint8_t* buf, size_t n) {
  size_t sent = 0;
  while (sent < n) {
    ssize_t k = ::send(fd, buf + sent, n - sent, MSG_NOSIGNAL);
    if (k <= 0) {
      if (k < 0 && errno == EINTR) continue;
      return false;
    }
    sent += static_cast<size_t>(k);
  }
  return true;
}

}  // namespace

Server::Server(const NetworkParams& params, const Skeleton& skeleton,
               const SessionConfig& config, const Calibration& calibration)
    : params_(params),
      skeleton_(skeleton),
      cfg_(config),
      cal_(calibration) {
  params_.validate();
  skeleton_.validate();
  cfg_.validate();
  cal_.validate();
}

Server::~Server() { close(); }

void Server::close() {
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
}

uint16_t Server::listen(uint16_t port) {
  close();
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error(errno_text("socket"));
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    std::string msg = errno_text("bind");
    ::close(fd);
    throw Error(msg);
  }
  if (::listen(fd, 1) < 0) {
    std::string msg = errno_text("listen");
    ::close(fd);
    throw Error(msg);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  if (::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len) < 0) {
    std::string msg = errno_text("getsockname");
    ::close(fd);
    throw Error(msg);
  }
  listen_fd_ = fd;
  return ntohs(bound.sin_port);
}

bool Server::serve_one_client(int accept_timeout_ms) {
  if (listen_fd_ < 0) throw Error("serve: not listening");
  if (accept_timeout_ms >= 0) {
    pollfd p{listen_fd_, POLLIN, 0};
    int r = ::poll(&p, 1, accept_timeout_ms);
    if (r <= 0) return false;
  }
  int client = ::accept(listen_fd_, nullptr, nullptr);
  if (client < 0) return false;

  StreamSession session(params_, skeleton_, cfg_);
  std::array<uint8_t, kWireRequestSize> req;
  std::array<uint8_t, kWireResponseSize> resp;
  while (read_full(client, req.data(), req.size())) {
    TrackerFrame frame;
    uint32_t id = 0;
    try {
      id = decode_request(req.data(), &frame);
    } catch (const ParseError&) {
      // Bad magic or version: the id field cannot be trusted. Send an error
      // frame, then drop the connection.
      StepResult empty;
      encode_response(0, kWireStatusError, empty, resp.data());
      write_full(client, resp.data(), resp.size());
      break;
    }
    StepResult r = session.step(apply_calibration(frame, cal_));
    encode_response(id, static_cast<uint8_t>(r.status), r, resp.data());
    if (!write_full(client, resp.data(), resp.size())) break;
  }
  ::close(client);
  return true;
}

}  // namespace lobstr
