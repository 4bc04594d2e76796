#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "dropvision/error.hpp"

namespace dropvision {

struct EpochRecord {
    int epoch = 0; // 1-based
    double train_loss = 0.0;
    double eval_loss = 0.0;
    double eval_metric = 0.0;

    bool operator==(const EpochRecord&) const = default;
};

// Per-epoch training history; eval_metric is mean IoU for segmentation runs
// and accuracy for classification runs.
struct TrainingLog {
    std::string metric_name = "eval_metric";
    std::vector<EpochRecord> records;
    int best_epoch = 0; // 1-based epoch whose weights the trained model carries

    bool operator==(const TrainingLog&) const = default;
};

inline void write_training_log_csv(const TrainingLog& log, const std::filesystem::path& path) {
    std::ofstream out(path);
    require(out.good(), "write_training_log_csv: cannot open '" + path.string() + "'");
    out << "epoch,train_loss,eval_loss," << log.metric_name << "\n";
    out << std::setprecision(17);
    for (const EpochRecord& r : log.records)
        out << r.epoch << ',' << r.train_loss << ',' << r.eval_loss << ',' << r.eval_metric
            << "\n";
    require(out.good(), "write_training_log_csv: write failed for '" + path.string() + "'");
}

inline TrainingLog read_training_log_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), "read_training_log_csv: cannot open '" + path.string() + "'");
    TrainingLog log;
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "read_training_log_csv: empty file");
    const auto last_comma = line.find_last_of(',');
    require(last_comma != std::string::npos, "read_training_log_csv: malformed header");
    log.metric_name = line.substr(last_comma + 1);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        EpochRecord r;
        char c;
        require(static_cast<bool>(ss >> r.epoch >> c >> r.train_loss >> c >> r.eval_loss >> c >>
                                  r.eval_metric),
                "read_training_log_csv: malformed row '" + line + "'");
        log.records.push_back(r);
    }
    return log;
}

} // namespace dropvision
