#include "gnet/run_config.hpp"

#include "gnet/binary_io.hpp"
#include "gnet/json_util.hpp"

namespace gnet {

nlohmann::json parse_json(const std::string& text, const std::string& where) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(where, std::string("malformed JSON: ") + e.what());
    }
}

void RunConfig::validate() const {
    model.validate();
    augment.validate();
    split.validate();
    train.validate();
}

nlohmann::json RunConfig::to_json() const {
    const ScheduleState& s = train.schedule;
    return {{"model", model.to_json()},
            {"augment", augment.to_json()},
            {"split", split.to_json()},
            {"train",
             {{"max_epochs", train.max_epochs},
              {"batch_size", train.batch_size},
              {"lr", train.lr},
              {"augment", train.augment},
              {"seed", train.seed},
              {"early_stop_patience", s.early_stop_patience},
              {"plateau_patience", s.plateau_patience},
              {"lr_factor", s.factor},
              {"min_lr", s.min_lr},
              {"threshold", s.threshold},
              {"target_train_accuracy", train.target_train_accuracy}}},
            {"paths", {{"records", records}, {"checkpoint", checkpoint}, {"events", events}}}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    JsonReader r(j, "");
    if (r.has("model")) c.model = ModelConfig::from_json(r.at("model"));
    if (r.has("augment")) c.augment = AugmentPolicy::from_json(r.at("augment"));
    if (r.has("split")) c.split = SplitSpec::from_json(r.at("split"));
    if (r.has("train")) {
        JsonReader t(r.at("train"), "train");
        ScheduleState& s = c.train.schedule;
        t.read("max_epochs", c.train.max_epochs);
        t.read("batch_size", c.train.batch_size);
        t.read("lr", c.train.lr);
        t.read("augment", c.train.augment);
        t.read("seed", c.train.seed);
        t.read("early_stop_patience", s.early_stop_patience);
        t.read("plateau_patience", s.plateau_patience);
        t.read("lr_factor", s.factor);
        t.read("min_lr", s.min_lr);
        t.read("threshold", s.threshold);
        t.read("target_train_accuracy", c.train.target_train_accuracy);
        t.finish();
    }
    if (r.has("paths")) {
        JsonReader p(r.at("paths"), "paths");
        p.read("records", c.records);
        p.read("checkpoint", c.checkpoint);
        p.read("events", c.events);
        p.finish();
    }
    r.finish();
    c.train.policy = c.augment;
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::string& path) { return from_json(parse_json(read_file(path), path)); }

void RunConfig::save(const std::string& path) const { write_file(path, to_json().dump(2) + "\n"); }

}  // namespace gnet
