#pragma once

#include <fstream>
#include <initializer_list>
#include <iomanip>
#include <stdexcept>
#include <string>

namespace qttfit {

/// Minimal CSV writer; doubles are written with 17 significant digits so that
/// files round-trip and reruns compare byte for byte.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::initializer_list<std::string> header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
    out_ << std::setprecision(17);
    bool first = true;
    for (const auto& h : header) {
      out_ << (first ? "" : ",") << h;
      first = false;
    }
    out_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... values) {
    bool first = true;
    ((out_ << (first ? "" : ",") << values, first = false), ...);
    out_ << '\n';
    if (!out_) throw std::runtime_error("CSV write failed");
  }

 private:
  std::ofstream out_;
};

}  // namespace qttfit
