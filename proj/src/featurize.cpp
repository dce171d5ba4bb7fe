#include "oosenc/featurize.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace oosenc {

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char ch : text) {
        if (std::isalnum(ch)) {
            cur += static_cast<char>(std::tolower(ch));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Vector hash_featurize(std::string_view text, std::size_t dim) {
    if (dim < 8) throw std::invalid_argument("featurizer dimension must be >= 8");
    Vector v(dim, 0.0);
    for (const auto& tok : tokenize(text)) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char ch : tok) {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
        const std::size_t bucket = static_cast<std::size_t>(h % dim);
        v[bucket] += (h >> 63) ? -1.0 : 1.0;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (double& x : v) x /= norm;
    return v;
}

}  // namespace oosenc
