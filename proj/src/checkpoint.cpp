#include "fedskel/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fedskel {

namespace {

constexpr char kMagic[4] = {'F', 'S', 'K', 'L'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& f, std::uint32_t v) {
    const char b[4] = {char(v), char(v >> 8), char(v >> 16), char(v >> 24)};
    f.write(b, 4);
}

void put_u64(std::ostream& f, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char(v >> (8 * i));
    f.write(b, 8);
}

void put_f32(std::ostream& f, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(f, bits);
}

void put_f64(std::ostream& f, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(f, bits);
}

struct Reader {
    std::ifstream f;
    std::string path;

    void need(char* dst, std::size_t n) {
        f.read(dst, std::streamsize(n));
        if (std::size_t(f.gcount()) != n) {
            throw std::runtime_error("truncated checkpoint " + path);
        }
    }
    std::uint32_t u32() {
        char b[4];
        need(b, 4);
        return std::uint32_t(std::uint8_t(b[0])) | (std::uint32_t(std::uint8_t(b[1])) << 8) |
               (std::uint32_t(std::uint8_t(b[2])) << 16) |
               (std::uint32_t(std::uint8_t(b[3])) << 24);
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        char b[8];
        need(b, 8);
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(b[i])) << (8 * i);
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

void put_tensor(std::ostream& f, const Tensor& t) {
    put_u64(f, t.numel());
    for (float v : t.data) put_f32(f, v);
}

void read_tensor(Reader& r, Tensor& t) {
    const std::uint64_t n = r.u64();
    if (n != t.numel()) {
        throw std::runtime_error("checkpoint " + r.path + " tensor length " + std::to_string(n) +
                                 " does not match expected " + std::to_string(t.numel()));
    }
    for (std::size_t i = 0; i < t.numel(); ++i) t.data[i] = r.f32();
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const ParamSet& global,
                     const std::vector<ClientSnapshot>& clients) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f.write(kMagic, 4);
    put_u32(f, kVersion);
    const Shape3 in = model.input_shape();
    put_u32(f, std::uint32_t(in.c));
    put_u32(f, std::uint32_t(in.h));
    put_u32(f, std::uint32_t(in.w));
    put_u32(f, std::uint32_t(model.size()));
    for (std::size_t l = 0; l < model.size(); ++l) {
        const LayerSpec& s = model.layer(l);
        put_u32(f, std::uint32_t(s.kind));
        put_u32(f, std::uint32_t(s.scope));
        put_u32(f, std::uint32_t(s.filters));
        put_u32(f, std::uint32_t(s.kernel));
        put_u32(f, std::uint32_t(s.stride));
        put_u32(f, std::uint32_t(s.pad));
        put_u32(f, std::uint32_t(s.units));
        put_u32(f, std::uint32_t(s.pool));
        put_u32(f, std::uint32_t(s.pool_stride));
    }
    for (std::size_t l : model.trainable_indices()) {
        if (model.layer(l).scope != Scope::Global) continue;
        put_u32(f, std::uint32_t(l));
        put_tensor(f, global.entries[l].w);
        put_tensor(f, global.entries[l].b);
    }
    put_u32(f, std::uint32_t(clients.size()));
    for (const ClientSnapshot& c : clients) {
        put_u64(f, c.id);
        put_f64(f, c.ratio);
        f.put(c.has_mask ? char(1) : char(0));
        if (!c.has_mask) continue;
        for (std::size_t l = 0; l < model.size(); ++l) {
            if (!model.prunable(l)) continue;
            const auto& bits = c.mask.channels[l];
            put_u64(f, bits.size());
            std::uint8_t acc = 0;
            int filled = 0;
            for (std::size_t i = 0; i < bits.size(); ++i) {
                if (bits[i]) acc |= std::uint8_t(1u << filled);
                if (++filled == 8) {
                    f.put(char(acc));
                    acc = 0;
                    filled = 0;
                }
            }
            if (filled) f.put(char(acc));
        }
    }
    if (!f) throw std::runtime_error("short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    Reader r;
    r.path = path;
    r.f.open(path, std::ios::binary);
    if (!r.f) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[4];
    r.need(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("file " + path + " is not a checkpoint (bad magic)");
    }
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw std::runtime_error("checkpoint " + path + " has format version " +
                                 std::to_string(version) + ", expected " +
                                 std::to_string(kVersion));
    }
    Shape3 in;
    in.c = r.u32();
    in.h = r.u32();
    in.w = r.u32();
    const std::uint32_t nlayers = r.u32();
    std::vector<LayerSpec> specs(nlayers);
    for (auto& s : specs) {
        s.kind = LayerKind(r.u32());
        s.scope = Scope(r.u32());
        s.filters = r.u32();
        s.kernel = r.u32();
        s.stride = r.u32();
        s.pad = r.u32();
        s.units = r.u32();
        s.pool = r.u32();
        s.pool_stride = r.u32();
    }
    Model model(in, std::move(specs));
    ParamSet global = zero_params<float>(model);
    for (std::size_t l : model.trainable_indices()) {
        if (model.layer(l).scope != Scope::Global) continue;
        const std::uint32_t stored = r.u32();
        if (stored != l) {
            throw std::runtime_error("checkpoint " + path + " stores layer " +
                                     std::to_string(stored) + " where layer " +
                                     std::to_string(l) + " was expected");
        }
        read_tensor(r, global.entries[l].w);
        read_tensor(r, global.entries[l].b);
    }
    const std::uint32_t nclients = r.u32();
    std::vector<ClientSnapshot> clients(nclients);
    for (auto& c : clients) {
        c.id = r.u64();
        c.ratio = r.f64();
        char flag;
        r.need(&flag, 1);
        c.has_mask = flag != 0;
        if (!c.has_mask) continue;
        c.mask.channels.resize(model.size());
        for (std::size_t l = 0; l < model.size(); ++l) {
            if (!model.prunable(l)) continue;
            const std::uint64_t nbits = r.u64();
            if (nbits != model.filter_count(l)) {
                throw std::runtime_error("checkpoint " + path + " mask width mismatch at " +
                                         model.layer_label(l));
            }
            std::vector<std::uint8_t> bits(nbits, 0);
            const std::size_t nbytes = (nbits + 7) / 8;
            std::vector<char> raw(nbytes);
            r.need(raw.data(), nbytes);
            for (std::size_t i = 0; i < nbits; ++i) {
                bits[i] = (std::uint8_t(raw[i / 8]) >> (i % 8)) & 1u;
            }
            c.mask.channels[l] = std::move(bits);
        }
    }
    return Checkpoint{std::move(model), std::move(global), std::move(clients)};
}

}  // namespace fedskel
