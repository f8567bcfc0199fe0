#include "htr/checkpoint.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>

namespace htr {

namespace {

constexpr const char* kMagic = "HTR-CHECKPOINT v1";

struct Named {
    std::string key;
    ParamTensor* tensor;
};

std::vector<Named> collect(AgentNets& nets, ContextEncoder& encoder) {
    std::vector<Named> out;
    auto add = [&out](const char* role, Mlp& net) {
        for (ParamTensor* p : net.params()) out.push_back({std::string(role) + "/" + p->name, p});
    };
    add("actor", nets.actor);
    add("critic1", nets.critic1);
    add("critic2", nets.critic2);
    add("target1", nets.target1);
    add("target2", nets.target2);
    add("encoder", encoder.net());
    return out;
}

void write_matrix(std::ostream& os, const Matrix& m) {
    char buf[40];
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) {
            std::snprintf(buf, sizeof(buf), "%a", m(i, j));
            os << (j ? " " : "") << buf;
        }
        os << '\n';
    }
}

void read_matrix(std::istream& is, Matrix& m) {
    std::string tok;
    for (size_t i = 0; i < m.size(); ++i) {
        if (!(is >> tok)) throw std::runtime_error("checkpoint: truncated matrix data");
        m.data[i] = std::strtod(tok.c_str(), nullptr);
    }
}

}  // namespace

void save_checkpoint(const std::string& path, AgentNets& nets, ContextEncoder& encoder) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
    auto tensors = collect(nets, encoder);
    os << kMagic << '\n';
    os << "tensors " << tensors.size() << '\n';
    for (const auto& [key, p] : tensors) {
        os << "tensor " << key << ' ' << p->value.rows << ' ' << p->value.cols << ' '
           << p->adam_step << '\n';
        write_matrix(os, p->value);
        write_matrix(os, p->adam_m);
        write_matrix(os, p->adam_v);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

void load_checkpoint(const std::string& path, AgentNets& nets, ContextEncoder& encoder) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    std::string line;
    std::getline(is, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kMagic) throw std::runtime_error("checkpoint: bad or unsupported header");
    std::string word;
    size_t count = 0;
    is >> word >> count;
    auto tensors = collect(nets, encoder);
    if (count != tensors.size())
        throw std::runtime_error("checkpoint: tensor count mismatch");
    for (auto& [key, p] : tensors) {
        std::string tag, name;
        int rows = 0, cols = 0;
        long step = 0;
        if (!(is >> tag >> name >> rows >> cols >> step) || tag != "tensor")
            throw std::runtime_error("checkpoint: malformed tensor record");
        if (name != key)
            throw std::runtime_error("checkpoint: expected tensor '" + key + "', found '" +
                                     name + "'");
        if (rows != p->value.rows || cols != p->value.cols)
            throw std::runtime_error("checkpoint: shape mismatch for '" + key + "'");
        p->adam_step = step;
        read_matrix(is, p->value);
        read_matrix(is, p->adam_m);
        read_matrix(is, p->adam_v);
    }
}

std::string params_checksum(AgentNets& nets, ContextEncoder& encoder) {
    // FNV-1a over the raw bytes of every value, in collection order.
    uint64_t h = 1469598103934665603ull;
    for (const auto& [key, p] : collect(nets, encoder)) {
        for (char c : key) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        for (double v : p->value.data) {
            unsigned char bytes[sizeof(double)];
            std::memcpy(bytes, &v, sizeof(double));
            for (unsigned char b : bytes) {
                h ^= b;
                h *= 1099511628211ull;
            }
        }
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return buf;
}

}  // namespace htr
