#include "softmod/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "softmod/sac.hpp"

namespace softmod {

namespace {

constexpr char kMagic[8] = {'S', 'M', 'C', 'K', 'P', 'T', '\0', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& os, const std::string& s) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw ConfigError("checkpoint truncated");
    return v;
}

std::string get_string(std::istream& is) {
    const auto n = get<std::uint32_t>(is);
    if (n > (1u << 24)) throw ConfigError("checkpoint string length out of range");
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw ConfigError("checkpoint truncated");
    return s;
}

}  // namespace

const ParamSet& Checkpoint::section(const std::string& name) const {
    for (const auto& [n, p] : sections) {
        if (n == name) return p;
    }
    throw ConfigError("checkpoint has no section '" + name + "'");
}

bool Checkpoint::has_section(const std::string& name) const {
    for (const auto& s : sections) {
        if (s.first == name) return true;
    }
    return false;
}

std::string model_spec_header(const ModelSpec& spec) {
    const auto& m = spec.modular;
    const auto& b = spec.baseline;
    std::ostringstream os;
    os << "kind=" << to_string(spec.kind) << "\n"
       << "layers=" << m.layers << "\n"
       << "modules=" << m.modules << "\n"
       << "module_width=" << m.module_width << "\n"
       << "embed_width=" << m.embed_width << "\n"
       << "tasks=" << m.tasks << "\n"
       << "state_dim=" << m.state_dim << "\n"
       << "action_dim=" << m.action_dim << "\n"
       << "hidden_width=" << b.hidden_width << "\n"
       << "hidden_layers=" << b.hidden_layers << "\n"
       << "experts=" << b.experts << "\n"
       << "gate_width=" << b.gate_width << "\n";
    return os.str();
}

ModelSpec parse_model_spec_header(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("bad checkpoint header line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto num = [&](const char* key) -> std::size_t {
        auto it = kv.find(key);
        if (it == kv.end()) throw ConfigError(std::string("checkpoint header missing ") + key);
        return static_cast<std::size_t>(std::stoull(it->second));
    };
    ModelSpec spec;
    auto kind = kv.find("kind");
    if (kind == kv.end()) throw ConfigError("checkpoint header missing kind");
    spec.kind = arch_kind_from_string(kind->second);
    spec.modular = NetworkConfig::custom(num("layers"), num("modules"), num("module_width"), num("state_dim"),
                                         num("action_dim"), num("tasks"));
    spec.modular.embed_width = num("embed_width");
    spec.baseline.hidden_width = num("hidden_width");
    spec.baseline.hidden_layers = num("hidden_layers");
    spec.baseline.experts = num("experts");
    spec.baseline.gate_width = num("gate_width");
    return spec;
}

Checkpoint make_checkpoint(const Trainer& trainer) {
    Checkpoint c;
    c.spec = trainer.spec();
    c.sections = {{"policy", trainer.policy},       {"q1", trainer.q1}, {"q2", trainer.q2},
                  {"q1_target", trainer.q1_target}, {"q2_target", trainer.q2_target},
                  {"temperature", trainer.temps.log_alpha()}};
    return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot write checkpoint " + path);
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, kCheckpointVersion);
    put_string(os, model_spec_header(ckpt.spec));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(ckpt.sections.size()));
    for (const auto& [name, params] : ckpt.sections) {
        put_string(os, name);
        put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const Tensor& t = params[i];
            put_string(os, params.name(i));
            put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
            put<std::uint64_t>(os, t.rows());
            put<std::uint64_t>(os, t.cols());
            os.write(reinterpret_cast<const char*>(t.values().data()),
                     static_cast<std::streamsize>(t.size() * sizeof(double)));
        }
    }
    if (!os) throw ConfigError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open checkpoint " + path);
    char magic[sizeof(kMagic)];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw ConfigError(path + " is not a checkpoint");
    const auto version = get<std::uint32_t>(is);
    if (version != kCheckpointVersion) {
        throw ConfigError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint c;
    c.spec = parse_model_spec_header(get_string(is));
    const auto sections = get<std::uint32_t>(is);
    for (std::uint32_t s = 0; s < sections; ++s) {
        std::string name = get_string(is);
        ParamSet params;
        const auto count = get<std::uint32_t>(is);
        for (std::uint32_t i = 0; i < count; ++i) {
            std::string pname = get_string(is);
            const auto rank = get<std::uint32_t>(is);
            const auto rows = get<std::uint64_t>(is);
            const auto cols = get<std::uint64_t>(is);
            if (rank < 1 || rank > 2 || (rank == 1 && rows != 1) || rows * cols > (1ull << 32)) {
                throw ConfigError("bad tensor header for " + pname);
            }
            std::vector<double> values(rows * cols);
            is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
            if (!is) throw ConfigError("checkpoint truncated in " + pname);
            params.add(std::move(pname), rank == 1 ? Tensor::vector(std::move(values))
                                                   : Tensor::matrix(rows, cols, std::move(values)));
        }
        c.sections.emplace_back(std::move(name), std::move(params));
    }
    return c;
}

}  // namespace softmod
