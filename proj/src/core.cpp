#include "difstring/core.hpp"

#include <iostream>
#include <mutex>

namespace difstring {

namespace {
std::mutex g_warning_mutex;
WarningHandler g_warning_handler;
} // namespace

void set_warning_handler(WarningHandler handler) {
  std::lock_guard lock(g_warning_mutex);
  g_warning_handler = std::move(handler);
}

void warn(const std::string& message) {
  std::lock_guard lock(g_warning_mutex);
  if (g_warning_handler)
    g_warning_handler(message);
  else
    std::cerr << "warning: " << message << '\n';
}

} // namespace difstring
