#include "fedfs/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fedfs/errors.hpp"

namespace fedfs {

namespace {

constexpr std::size_t kEvalChunk = 512;
constexpr const char* kHeader = "round,acc_global,acc_local,mean_train_loss,beta,recon_initial,recon_final,selected";

std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace

double evaluate(const ModelParams& params, const Dataset& testset) {
    if (testset.size() == 0) throw EmptyInputError("evaluate: empty test set");
    if (testset.dim() != params.spec.input_dim()) throw DimensionError("evaluate: feature dim mismatch");

    std::size_t correct = 0;
    const std::size_t d = testset.dim();
    for (std::size_t begin = 0; begin < testset.size(); begin += kEvalChunk) {
        const std::size_t end = std::min(begin + kEvalChunk, testset.size());
        Tensor2 chunk(end - begin, d);
        std::copy_n(testset.features.row(begin), (end - begin) * d, chunk.data.data());
        const Tensor2 logits = forward(params, chunk);
        for (std::size_t i = 0; i < logits.rows; ++i) {
            const double* zi = logits.row(i);
            std::size_t best = 0;
            for (std::size_t j = 1; j < logits.cols; ++j) {
                if (zi[j] > zi[best]) best = j;  // ties keep the lowest index
            }
            if (static_cast<int>(best) == testset.labels[begin + i]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(testset.size());
}

double acc_local(const std::vector<const ModelParams*>& updated_client_params, const Dataset& testset) {
    if (updated_client_params.empty()) throw EmptyInputError("acc_local: no client models");
    double sum = 0.0;
    for (const ModelParams* p : updated_client_params) sum += evaluate(*p, testset);
    return sum / static_cast<double>(updated_client_params.size());
}

std::string metrics_to_csv(const std::vector<RoundMetrics>& metrics) {
    std::ostringstream os;
    os << kHeader << '\n';
    for (const RoundMetrics& m : metrics) {
        os << m.round << ',' << fmt_real(m.acc_global) << ',' << fmt_real(m.acc_local) << ','
           << fmt_real(m.mean_train_loss) << ',' << fmt_real(m.beta) << ','
           << (m.recon_initial ? fmt_real(*m.recon_initial) : "") << ','
           << (m.recon_final ? fmt_real(*m.recon_final) : "") << ',';
        for (std::size_t i = 0; i < m.selected_ids.size(); ++i) {
            if (i) os << ';';
            os << m.selected_ids[i];
        }
        os << '\n';
    }
    return os.str();
}

void write_metrics_csv(const std::vector<RoundMetrics>& metrics, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    const std::string csv = metrics_to_csv(metrics);
    f.write(csv.data(), static_cast<std::streamsize>(csv.size()));
    if (!f) throw IoError("write failed for " + path);
}

std::vector<RoundMetrics> read_metrics_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != kHeader) throw FormatError("unexpected metrics header in " + path);

    std::vector<RoundMetrics> out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> fields = split(line, ',');
        if (fields.size() != 8) throw FormatError("unexpected column count in " + path);
        RoundMetrics m;
        m.round = std::stoull(fields[0]);
        m.acc_global = std::stod(fields[1]);
        m.acc_local = std::stod(fields[2]);
        m.mean_train_loss = std::stod(fields[3]);
        m.beta = std::stod(fields[4]);
        if (!fields[5].empty()) m.recon_initial = std::stod(fields[5]);
        if (!fields[6].empty()) m.recon_final = std::stod(fields[6]);
        if (!fields[7].empty()) {
            for (const std::string& id : split(fields[7], ';')) m.selected_ids.push_back(std::stoull(id));
        }
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace fedfs
