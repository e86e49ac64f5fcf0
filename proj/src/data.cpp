#include "fedskel/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "fedskel/rng.hpp"

namespace fedskel {

namespace {

std::vector<std::uint8_t> read_all(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<std::uint8_t> out;
    std::uint8_t buf[1 << 16];
    int got;
    while ((got = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + got);
    const bool bad = got < 0;
    gzclose(f);
    if (bad) throw std::runtime_error("decompression failed reading " + path);
    return out;
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off) {
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

void put_be32(std::ofstream& f, std::uint32_t v) {
    const char bytes[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
    f.write(bytes, 4);
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    constexpr std::uint32_t kImagesMagic = 0x00000803;
    constexpr std::uint32_t kLabelsMagic = 0x00000801;

    const auto ibytes = read_all(images_path);
    if (ibytes.size() < 16) throw std::runtime_error("truncated IDX header in " + images_path);
    const std::uint32_t imagic = be32(ibytes, 0);
    if (imagic != kImagesMagic) {
        throw std::runtime_error("wrong magic " + hex32(imagic) + " in " + images_path +
                                 " (expected " + hex32(kImagesMagic) + " for images)");
    }
    const std::size_t n = be32(ibytes, 4);
    const std::size_t rows = be32(ibytes, 8);
    const std::size_t cols = be32(ibytes, 12);
    if (n == 0 || rows == 0 || cols == 0) {
        throw std::runtime_error("IDX image file " + images_path + " declares an empty dataset");
    }
    if (ibytes.size() < 16 + n * rows * cols) {
        throw std::runtime_error("truncated IDX image data in " + images_path + ": need " +
                                 std::to_string(16 + n * rows * cols) + " bytes, have " +
                                 std::to_string(ibytes.size()));
    }

    const auto lbytes = read_all(labels_path);
    if (lbytes.size() < 8) throw std::runtime_error("truncated IDX header in " + labels_path);
    const std::uint32_t lmagic = be32(lbytes, 0);
    if (lmagic != kLabelsMagic) {
        throw std::runtime_error("wrong magic " + hex32(lmagic) + " in " + labels_path +
                                 " (expected " + hex32(kLabelsMagic) + " for labels)");
    }
    const std::size_t ln = be32(lbytes, 4);
    if (ln != n) {
        throw std::runtime_error("IDX count mismatch: " + std::to_string(n) + " images in " +
                                 images_path + " vs " + std::to_string(ln) + " labels in " +
                                 labels_path);
    }
    if (lbytes.size() < 8 + ln) {
        throw std::runtime_error("truncated IDX label data in " + labels_path);
    }

    Dataset ds;
    ds.images = Tensor({n, 1, rows, cols});
    float* ip = ds.images.ptr();
    const std::uint8_t* src = ibytes.data() + 16;
    const float scale = 1.0f / 255.0f;
    for (std::size_t i = 0; i < n * rows * cols; ++i) ip[i] = float(src[i]) * scale;
    ds.labels.resize(n);
    int maxlab = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ds.labels[i] = int(lbytes[8 + i]);
        if (ds.labels[i] > maxlab) maxlab = ds.labels[i];
    }
    ds.classes = std::size_t(maxlab) + 1;
    return ds;
}

void write_idx(const std::string& images_path, const std::string& labels_path,
               const Dataset& ds) {
    if (ds.size() == 0) throw std::invalid_argument("refusing to write an empty dataset");
    if (ds.images.rank() != 4 || ds.images.dim(1) != 1) {
        throw std::invalid_argument("IDX output requires single-channel [N,1,H,W] images, got " +
                                    shape_string(ds.images.shape));
    }
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("cannot write " + images_path);
    put_be32(img, 0x00000803);
    put_be32(img, std::uint32_t(ds.size()));
    put_be32(img, std::uint32_t(ds.images.dim(2)));
    put_be32(img, std::uint32_t(ds.images.dim(3)));
    const float* ip = ds.images.ptr();
    std::vector<char> buf(ds.images.numel());
    for (std::size_t i = 0; i < buf.size(); ++i) {
        const float v = std::min(1.0f, std::max(0.0f, ip[i]));
        buf[i] = char(int(std::lround(v * 255.0f)));
    }
    img.write(buf.data(), std::streamsize(buf.size()));
    if (!img) throw std::runtime_error("short write to " + images_path);

    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("cannot write " + labels_path);
    put_be32(lab, 0x00000801);
    put_be32(lab, std::uint32_t(ds.size()));
    std::vector<char> lbuf(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) lbuf[i] = char(ds.labels[i]);
    lab.write(lbuf.data(), std::streamsize(lbuf.size()));
    if (!lab) throw std::runtime_error("short write to " + labels_path);
}

Dataset make_synthetic(std::size_t classes, std::size_t per_class, std::size_t image_size,
                       std::uint64_t seed, double noise_std, std::size_t index_offset) {
    if (classes < 2) throw std::invalid_argument("synthetic data needs at least 2 classes");
    if (per_class == 0) throw std::invalid_argument("synthetic data needs per_class > 0");
    if (image_size < 4) throw std::invalid_argument("synthetic image size must be at least 4");

    const std::size_t s = image_size;
    const std::size_t n = classes * per_class;
    Dataset ds;
    ds.classes = classes;
    ds.images = Tensor({n, 1, s, s});
    ds.labels.resize(n);

    struct Bump {
        double cx, cy, sigma, amp;
    };
    const std::size_t bumps_per_class = 3;
    std::vector<Bump> bumps(classes * bumps_per_class);
    for (std::size_t k = 0; k < classes; ++k) {
        auto rng = keyed_rng(seed, RngStream::Synthetic, {std::uint64_t(k)});
        std::uniform_real_distribution<double> pos(0.2 * s, 0.8 * s);
        std::uniform_real_distribution<double> sig(0.08 * s, 0.16 * s);
        std::uniform_real_distribution<double> amp(0.7, 1.0);
        for (std::size_t b = 0; b < bumps_per_class; ++b) {
            bumps[k * bumps_per_class + b] = {pos(rng), pos(rng), sig(rng), amp(rng)};
        }
    }

    float* out = ds.images.ptr();
    for (std::size_t k = 0; k < classes; ++k) {
        for (std::size_t i = 0; i < per_class; ++i) {
            const std::size_t idx = k * per_class + i;
            ds.labels[idx] = int(k);
            auto rng = keyed_rng(seed, RngStream::Synthetic,
                                 {std::uint64_t(k), std::uint64_t(index_offset + i) + 1});
            std::normal_distribution<double> jitter(0.0, 0.02 * s);
            std::uniform_real_distribution<double> gain(0.85, 1.15);
            std::normal_distribution<double> pix(0.0, noise_std);
            Bump local[bumps_per_class];
            for (std::size_t b = 0; b < bumps_per_class; ++b) {
                Bump base = bumps[k * bumps_per_class + b];
                base.cx += jitter(rng);
                base.cy += jitter(rng);
                base.amp *= gain(rng);
                local[b] = base;
            }
            float* img = out + idx * s * s;
            for (std::size_t y = 0; y < s; ++y) {
                for (std::size_t x = 0; x < s; ++x) {
                    double v = 0.0;
                    for (const Bump& b : local) {
                        const double dx = double(x) - b.cx;
                        const double dy = double(y) - b.cy;
                        v += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
                    }
                    v += pix(rng);
                    img[y * s + x] = float(std::min(1.0, std::max(0.0, v)));
                }
            }
        }
    }
    return ds;
}

Partition shard_noniid(const Dataset& ds, std::size_t n_clients, std::size_t shards_per_client,
                       std::uint64_t seed) {
    if (n_clients == 0 || shards_per_client == 0) {
        throw std::invalid_argument("sharding needs at least one client and one shard each");
    }
    const std::size_t n = ds.size();
    const std::size_t shards = n_clients * shards_per_client;
    const std::size_t shard_size = n / shards;
    if (shard_size == 0) {
        throw std::invalid_argument("dataset of " + std::to_string(n) +
                                    " examples cannot fill " + std::to_string(shards) +
                                    " shards");
    }
    const std::size_t used = shard_size * shards;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&ds](std::size_t a, std::size_t b) {
        return ds.labels[a] < ds.labels[b];
    });
    order.resize(used);

    std::vector<std::size_t> deal(shards);
    std::iota(deal.begin(), deal.end(), 0);
    auto rng = keyed_rng(seed, RngStream::ShardDeal, {});
    deterministic_shuffle(deal, rng);

    Partition part;
    part.dropped = n - used;
    part.client_indices.resize(n_clients);
    for (std::size_t c = 0; c < n_clients; ++c) {
        auto& mine = part.client_indices[c];
        mine.reserve(shards_per_client * shard_size);
        for (std::size_t sidx = 0; sidx < shards_per_client; ++sidx) {
            const std::size_t shard = deal[c * shards_per_client + sidx];
            const std::size_t begin = shard * shard_size;
            for (std::size_t i = 0; i < shard_size; ++i) mine.push_back(order[begin + i]);
        }
    }
    return part;
}

}  // namespace fedskel
