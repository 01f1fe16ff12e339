#include "mfcn/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mfcn {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

KVConfig KVConfig::parse(const std::string& text) {
    KVConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            fail(strprintf("config line %d: expected 'key = value'", lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(strprintf("config line %d: empty key", lineno));
        cfg.set(key, value);
    }
    return cfg;
}

KVConfig KVConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string KVConfig::to_text() const {
    std::ostringstream out;
    for (const auto& key : order_) out << key << " = " << values_.at(key) << "\n";
    return out.str();
}

void KVConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) fail("config: cannot write " + path);
    out << to_text();
}

std::string KVConfig::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) fail("config: missing key " + key);
    return it->second;
}

std::string KVConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KVConfig::get_double(const std::string& key) const {
    const std::string v = get_string(key);
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') fail("config: key " + key + " is not a number: " + v);
    return x;
}

double KVConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

int KVConfig::get_int(const std::string& key) const {
    const double x = get_double(key);
    const int i = static_cast<int>(x);
    if (static_cast<double>(i) != x) fail("config: key " + key + " is not an integer");
    return i;
}

int KVConfig::get_int(const std::string& key, int fallback) const {
    return has(key) ? get_int(key) : fallback;
}

long long KVConfig::get_long(const std::string& key) const {
    const std::string v = get_string(key);
    char* end = nullptr;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') fail("config: key " + key + " is not an integer: " + v);
    return x;
}

long long KVConfig::get_long(const std::string& key, long long fallback) const {
    return has(key) ? get_long(key) : fallback;
}

bool KVConfig::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get_string(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    fail("config: key " + key + " is not a boolean: " + v);
}

std::vector<double> KVConfig::get_doubles(const std::string& key) const {
    const std::string v = get_string(key);
    std::vector<double> out;
    std::istringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        char* end = nullptr;
        const double x = std::strtod(item.c_str(), &end);
        if (end == item.c_str() || *end != '\0')
            fail("config: key " + key + " has a non-numeric entry: " + item);
        out.push_back(x);
    }
    if (out.empty()) fail("config: key " + key + " has no entries");
    return out;
}

std::vector<int> KVConfig::get_ints(const std::string& key) const {
    std::vector<int> out;
    for (double x : get_doubles(key)) {
        const int i = static_cast<int>(x);
        if (static_cast<double>(i) != x) fail("config: key " + key + " has a non-integer entry");
        out.push_back(i);
    }
    return out;
}

void KVConfig::set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) order_.push_back(key);
    values_[key] = value;
}

void KVConfig::set_double(const std::string& key, double value) {
    set(key, strprintf("%.17g", value));
}

}  // namespace mfcn
