#include "fedfs/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <zlib.h>

#include "fedfs/errors.hpp"
#include "fedfs/rng.hpp"

namespace fedfs {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<unsigned char> read_file_bytes(const std::string& path) {
    if (ends_with(path, ".gz")) {
        gzFile f = gzopen(path.c_str(), "rb");
        if (!f) throw IoError("cannot open " + path);
        std::vector<unsigned char> out;
        unsigned char buf[1 << 16];
        int got;
        while ((got = gzread(f, buf, sizeof(buf))) > 0) out.insert(out.end(), buf, buf + got);
        const bool bad = got < 0;
        gzclose(f);
        if (bad) throw IoError("gzip read failed for " + path);
        return out;
    }
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

class ByteReader {
public:
    explicit ByteReader(const std::vector<unsigned char>& bytes, const std::string& path)
        : bytes_(bytes), path_(path) {}

    std::uint32_t read_u32_be() {
        require(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_++];
        return v;
    }

    const unsigned char* read_block(std::size_t n) {
        require(n);
        const unsigned char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

private:
    void require(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw IoError("truncated file: " + path_);
    }

    const std::vector<unsigned char>& bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

void write_u32_be(std::ofstream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

void Dataset::validate() const {
    if (features.rows != labels.size()) throw ConsistencyError("dataset: feature rows differ from label count");
    for (int y : labels) {
        if (y < 0 || y >= num_classes) throw ConsistencyError("dataset: label out of range");
    }
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const std::vector<unsigned char> image_bytes = read_file_bytes(images_path);
    const std::vector<unsigned char> label_bytes = read_file_bytes(labels_path);

    ByteReader images(image_bytes, images_path);
    if (images.read_u32_be() != kImagesMagic) throw FormatError("bad image magic in " + images_path);
    const std::uint32_t count = images.read_u32_be();
    const std::uint32_t rows = images.read_u32_be();
    const std::uint32_t cols = images.read_u32_be();

    ByteReader labels(label_bytes, labels_path);
    if (labels.read_u32_be() != kLabelsMagic) throw FormatError("bad label magic in " + labels_path);
    const std::uint32_t label_count = labels.read_u32_be();
    if (count != label_count) {
        throw ConsistencyError("image count " + std::to_string(count) + " differs from label count " +
                               std::to_string(label_count));
    }

    const std::size_t d_in = static_cast<std::size_t>(rows) * cols;
    Dataset ds;
    ds.features = Tensor2(count, d_in);
    const unsigned char* pixels = images.read_block(static_cast<std::size_t>(count) * d_in);
    for (std::size_t i = 0; i < ds.features.data.size(); ++i) {
        ds.features.data[i] = static_cast<double>(pixels[i]) / 255.0;
    }
    const unsigned char* label_data = labels.read_block(count);
    ds.labels.assign(label_data, label_data + count);
    int max_label = 0;
    for (int y : ds.labels) max_label = std::max(max_label, y);
    ds.num_classes = count > 0 ? max_label + 1 : 0;
    ds.validate();
    return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path,
               std::size_t img_rows, std::size_t img_cols) {
    if (img_rows == 0 && img_cols == 0) {
        img_rows = 1;
        img_cols = ds.dim();
    }
    if (img_rows * img_cols != ds.dim()) throw DimensionError("write_idx: image shape does not match feature dim");
    if (ds.num_classes > 256) throw FormatError("write_idx: labels do not fit in a byte");

    std::ofstream imgf(images_path, std::ios::binary);
    if (!imgf) throw IoError("cannot open " + images_path);
    write_u32_be(imgf, kImagesMagic);
    write_u32_be(imgf, static_cast<std::uint32_t>(ds.size()));
    write_u32_be(imgf, static_cast<std::uint32_t>(img_rows));
    write_u32_be(imgf, static_cast<std::uint32_t>(img_cols));
    std::vector<unsigned char> pixels(ds.features.data.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        pixels[i] = static_cast<unsigned char>(std::llround(ds.features.data[i] * 255.0));
    }
    imgf.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!imgf) throw IoError("write failed for " + images_path);

    std::ofstream lblf(labels_path, std::ios::binary);
    if (!lblf) throw IoError("cannot open " + labels_path);
    write_u32_be(lblf, kLabelsMagic);
    write_u32_be(lblf, static_cast<std::uint32_t>(ds.size()));
    std::vector<unsigned char> bytes(ds.labels.begin(), ds.labels.end());
    lblf.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!lblf) throw IoError("write failed for " + labels_path);
}

Dataset make_synthetic(int num_classes, std::size_t samples_per_class, std::size_t d_in, double cluster_spread,
                       std::uint64_t seed) {
    if (num_classes < 1 || samples_per_class < 1 || d_in < 1) {
        throw ConfigError("make_synthetic: all counts must be >= 1");
    }
    Rng rng(seed);
    // Centers stay away from the clip boundary so small spreads remain unbiased.
    Tensor2 centers(num_classes, d_in);
    for (double& c : centers.data) c = rng.uniform(0.15, 0.85);

    Dataset ds;
    ds.num_classes = num_classes;
    ds.features = Tensor2(static_cast<std::size_t>(num_classes) * samples_per_class, d_in);
    ds.labels.resize(ds.features.rows);
    std::size_t row = 0;
    for (int c = 0; c < num_classes; ++c) {
        for (std::size_t s = 0; s < samples_per_class; ++s, ++row) {
            double* out = ds.features.row(row);
            const double* center = centers.row(c);
            for (std::size_t j = 0; j < d_in; ++j) {
                out[j] = std::clamp(center[j] + cluster_spread * rng.normal(), 0.0, 1.0);
            }
            ds.labels[row] = c;
        }
    }
    return ds;
}

std::vector<std::size_t> PartitionPlan::client_indices(std::size_t client) const {
    std::vector<std::size_t> out;
    out.reserve(client_size(client));
    for (const SampleRange& r : assignments[client]) {
        out.insert(out.end(), order.begin() + r.begin, order.begin() + r.end);
    }
    return out;
}

std::size_t PartitionPlan::client_size(std::size_t client) const {
    std::size_t n = 0;
    for (const SampleRange& r : assignments[client]) n += r.size();
    return n;
}

PartitionPlan partition_noniid(const Dataset& ds, std::size_t num_clients, std::size_t num_shards,
                               std::uint64_t seed) {
    if (num_clients == 0 || num_shards == 0) throw ConfigError("partition_noniid: zero clients or shards");
    if (num_shards % num_clients != 0) {
        throw ConfigError("partition_noniid: num_shards must be divisible by num_clients");
    }
    const std::size_t usable = ds.size() - ds.size() % num_shards;
    if (usable < num_shards) throw ConfigError("partition_noniid: fewer samples than shards");
    const std::size_t shard_size = usable / num_shards;
    const std::size_t shards_per_client = num_shards / num_clients;

    PartitionPlan plan;
    plan.num_clients = num_clients;
    plan.shards_per_client = shards_per_client;
    plan.order.resize(ds.size());
    std::iota(plan.order.begin(), plan.order.end(), 0);
    std::stable_sort(plan.order.begin(), plan.order.end(),
                     [&](std::size_t a, std::size_t b) { return ds.labels[a] < ds.labels[b]; });
    plan.order.resize(usable);

    std::vector<std::size_t> shard_ids(num_shards);
    std::iota(shard_ids.begin(), shard_ids.end(), 0);
    Rng rng(seed);
    rng.shuffle(shard_ids);

    plan.assignments.resize(num_clients);
    for (std::size_t c = 0; c < num_clients; ++c) {
        plan.assignments[c].reserve(shards_per_client);
        for (std::size_t s = 0; s < shards_per_client; ++s) {
            const std::size_t shard = shard_ids[c * shards_per_client + s];
            plan.assignments[c].push_back({shard * shard_size, (shard + 1) * shard_size});
        }
    }
    return plan;
}

PartitionPlan partition_iid(const Dataset& ds, std::size_t num_clients, std::uint64_t seed) {
    if (num_clients == 0) throw ConfigError("partition_iid: zero clients");
    if (num_clients > ds.size()) throw ConfigError("partition_iid: more clients than samples");

    PartitionPlan plan;
    plan.num_clients = num_clients;
    plan.shards_per_client = 1;
    plan.order.resize(ds.size());
    std::iota(plan.order.begin(), plan.order.end(), 0);
    Rng rng(seed);
    rng.shuffle(plan.order);

    plan.assignments.resize(num_clients);
    for (std::size_t c = 0; c < num_clients; ++c) {
        const std::size_t begin = c * ds.size() / num_clients;
        const std::size_t end = (c + 1) * ds.size() / num_clients;
        plan.assignments[c].push_back({begin, end});
    }
    return plan;
}

}  // namespace fedfs
