#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "kssl/core.hpp"

namespace kssl {

/// Shortest exact decimal form of a double (round-trips bit-exactly).
inline std::string format_double(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v) return buf;
  }
  return buf;
}

using CsvCell = std::variant<long long, double, std::string>;

/// Deterministic CSV emitter: fixed header, rows written in the order they
/// are appended, doubles in shortest exact form.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) {
    std::filesystem::create_directories(path.parent_path());
    out_.open(path);
    if (!out_) throw input_error("CsvWriter: cannot open " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out_ << ',';
      out_ << header[i];
    }
    out_ << '\n';
  }

  void row(const std::vector<CsvCell>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      if (std::holds_alternative<long long>(cells[i]))
        out_ << std::get<long long>(cells[i]);
      else if (std::holds_alternative<double>(cells[i]))
        out_ << format_double(std::get<double>(cells[i]));
      else
        out_ << std::get<std::string>(cells[i]);
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

/// Static-partition parallel loop; item i writes only its own slot, so the
/// result is independent of the thread count.
template <typename Fn>
void parallel_for(int items, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, items));
  if (threads == 1) {
    for (int i = 0; i < items; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int i = t; i < items; i += threads) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace kssl
