#pragma once

#include <string>

#include "json.hpp"

#include "gnet/augment.hpp"
#include "gnet/dataset.hpp"
#include "gnet/model.hpp"
#include "gnet/trainer.hpp"

namespace gnet {

/// Everything a training run depends on, as one JSON document.
struct RunConfig {
    ModelConfig model;
    AugmentPolicy augment;
    SplitSpec split;
    TrainOptions train;  // callback, workers and checkpoint path are not serialized
    std::string records;
    std::string checkpoint = "best.gnet";
    std::string events = "events.csv";

    void validate() const;
    /// All defaults written out.
    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::string& path);
    void save(const std::string& path) const;
};

/// Parses JSON text, mapping syntax errors to ConfigError.
nlohmann::json parse_json(const std::string& text, const std::string& where);

}  // namespace gnet
