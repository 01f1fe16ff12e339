#pragma once

#include <map>
#include <string>
#include <vector>

#include "mfcn/common.hpp"

namespace mfcn {

// Flat key-value configuration file: one "key = value" per line, '#' starts
// a comment. Round-trips losslessly through save().
class KVConfig {
  public:
    static KVConfig load(const std::string& path);
    static KVConfig parse(const std::string& text);
    void save(const std::string& path) const;
    std::string to_text() const;

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    const std::vector<std::string>& keys() const { return order_; }

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key) const;
    int get_int(const std::string& key, int fallback) const;
    long long get_long(const std::string& key) const;
    long long get_long(const std::string& key, long long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key) const;  // comma-separated
    std::vector<int> get_ints(const std::string& key) const;

    void set(const std::string& key, const std::string& value);
    void set_double(const std::string& key, double value);

  private:
    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
};

}  // namespace mfcn
