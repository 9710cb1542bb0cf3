#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dncnn {

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    std::optional<double> val_psnr;

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

/// Per-epoch training trace.
struct History {
    std::vector<EpochRecord> epochs;

    /// `epoch,lr,train_loss,val_psnr`, val_psnr empty when not evaluated.
    std::string to_csv() const;
    void save_csv(const std::filesystem::path& path) const;

    friend bool operator==(const History&, const History&) = default;
};

}  // namespace dncnn
