#include "causalattr/warnings.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace causalattr {

namespace {
std::mutex handler_mutex;
std::function<void(const std::string&)>& handler_ref() {
  static std::function<void(const std::string&)> handler;
  return handler;
}
}  // namespace

void warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(handler_mutex);
  auto& h = handler_ref();
  if (h) {
    h(message);
  } else {
    std::cerr << "warning: " << message << '\n';
  }
}

void set_warning_handler(std::function<void(const std::string&)> handler) {
  std::lock_guard<std::mutex> lock(handler_mutex);
  handler_ref() = std::move(handler);
}

void reset_warning_handler() {
  std::lock_guard<std::mutex> lock(handler_mutex);
  handler_ref() = nullptr;
}

}  // namespace causalattr
