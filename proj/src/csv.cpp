#include "mfcn/csv.hpp"

namespace mfcn {

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header,
                     const std::string& manifest_ref)
    : out_(path), columns_(header.size()), path_(path) {
    if (!out_) fail("csv: cannot open " + path);
    out_ << "# manifest: " << manifest_ref << "\n";
    row(header);
}

CsvWriter::~CsvWriter() = default;

std::string CsvWriter::quote(const std::string& cell) {
    if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
    std::string quoted = "\"";
    for (char c : cell) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) fail("csv: wrong number of cells for " + path_);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        out_ << quote(cells[i]);
    }
    out_ << '\n';
    if (!out_) fail("csv: write failed for " + path_);
}

}  // namespace mfcn
