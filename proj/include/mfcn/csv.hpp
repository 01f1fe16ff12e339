#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "mfcn/common.hpp"

namespace mfcn {

// CSV output with RFC-4180-style quoting. The first line is a comment
// pointing at the run manifest, followed by the header row.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header,
              const std::string& manifest_ref = "manifest.txt");
    ~CsvWriter();

    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void row(const std::vector<std::string>& cells);

    static std::string num(double x) { return strprintf("%.17g", x); }
    static std::string num(int x) { return strprintf("%d", x); }
    static std::string num(long x) { return strprintf("%ld", x); }
    static std::string flag(bool b) { return b ? "true" : "false"; }

  private:
    static std::string quote(const std::string& cell);
    std::ofstream out_;
    std::size_t columns_ = 0;
    std::string path_;
};

}  // namespace mfcn
