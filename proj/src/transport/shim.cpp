#include "janus/transport/shim.hpp"

#include <cstdlib>

#include "janus/errors.hpp"

namespace janus::transport {

LossShimSpec LossShimSpec::from_list(const std::string& csv) {
  LossShimSpec spec;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t end = csv.find(',', pos);
    if (end == std::string::npos) end = csv.size();
    const std::string tok = csv.substr(pos, end - pos);
    if (!tok.empty()) {
      char* stop = nullptr;
      const unsigned long long v = std::strtoull(tok.c_str(), &stop, 10);
      if (stop == tok.c_str() || *stop != '\0')
        throw ConfigError("bad drop list entry: " + tok);
      spec.drop_seqs.insert(v);
    }
    pos = end + 1;
  }
  return spec;
}

}  // namespace janus::transport
