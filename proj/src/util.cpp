#include "rtd/util.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rtd {

double Rng::normal(double mu, double sigma) {
  // Box-Muller; two fresh uniforms per call so the stream has no hidden state
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  double u2 = uniform();
  double z = std::sqrt(-2.0 * std::log(u1)) *
             std::cos(6.28318530717958647692 * u2);
  return mu + sigma * z;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::from_file(const std::string& path) {
  return from_string(read_file(path), path);
}

Config Config::from_string(const std::string& text, const std::string& origin) {
  Config cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error(strf("%s:%d: malformed section header",
                                      origin.c_str(), lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(strf("%s:%d: expected key = value",
                                    origin.c_str(), lineno));
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error(strf("%s:%d: empty key", origin.c_str(), lineno));
    if (!section.empty()) key = section + "." + key;
    cfg.kv_[key] = val;
  }
  return cfg;
}

const std::string& Config::str(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end())
    throw std::runtime_error(strf("config %s: missing key '%s'",
                                  origin_.c_str(), key.c_str()));
  return it->second;
}

std::string Config::str(const std::string& key, const std::string& dflt) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? dflt : it->second;
}

double Config::num(const std::string& key) const {
  const std::string& v = str(key);
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::runtime_error(strf("config %s: key '%s' is not a number: '%s'",
                                  origin_.c_str(), key.c_str(), v.c_str()));
  }
}

double Config::num(const std::string& key, double dflt) const {
  return has(key) ? num(key) : dflt;
}

std::int64_t Config::integer(const std::string& key) const {
  double d = num(key);
  auto i = static_cast<std::int64_t>(d);
  if (static_cast<double>(i) != d)
    throw std::runtime_error(strf("config %s: key '%s' is not an integer",
                                  origin_.c_str(), key.c_str()));
  return i;
}

std::int64_t Config::integer(const std::string& key, std::int64_t dflt) const {
  return has(key) ? integer(key) : dflt;
}

bool Config::flag(const std::string& key, bool dflt) const {
  if (!has(key)) return dflt;
  const std::string& v = str(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::runtime_error(strf("config %s: key '%s' is not a boolean: '%s'",
                                origin_.c_str(), key.c_str(), v.c_str()));
}

std::vector<double> Config::nums(const std::string& key) const {
  std::string v = str(key);
  for (char& c : v)
    if (c == ',') c = ' ';
  std::istringstream in(v);
  std::vector<double> out;
  double d;
  while (in >> d) out.push_back(d);
  return out;
}

std::uint64_t Config::content_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& [k, v] : kv_) {
    h = fnv1a64(k, h);
    h = fnv1a64("=", h);
    h = fnv1a64(v, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

std::string strf(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  va_list copy;
  va_copy(copy, args);
  int n = std::vsnprintf(nullptr, 0, fmt, copy);
  va_end(copy);
  std::string out(static_cast<std::size_t>(n), '\0');
  std::vsnprintf(out.data(), out.size() + 1, fmt, args);
  va_end(args);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
  if (!out) throw std::runtime_error("short write: " + path);
}

std::string num_str(double v) {
  std::string s = strf("%.17g", v);
  // trim to the shortest representation that round-trips
  for (int prec = 1; prec < 17; ++prec) {
    std::string c = strf("%.*g", prec, v);
    if (std::stod(c) == v) return c;
  }
  return s;
}

}  // namespace rtd
