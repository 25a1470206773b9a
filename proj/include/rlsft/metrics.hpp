#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace rlsft {

// One JSON object per event, appended as a JSONL line. Key order is preserved
// so two identical runs produce byte-identical metrics files.
class MetricsSink {
public:
    virtual ~MetricsSink() = default;
    virtual void emit(const nlohmann::ordered_json& event) = 0;
};

class NullMetricsSink : public MetricsSink {
public:
    void emit(const nlohmann::ordered_json&) override {}
};

class MemoryMetricsSink : public MetricsSink {
public:
    std::vector<nlohmann::ordered_json> events;
    void emit(const nlohmann::ordered_json& event) override { events.push_back(event); }
};

class JsonlMetricsSink : public MetricsSink {
public:
    explicit JsonlMetricsSink(const std::string& path, bool append = false)
        : out_(path, append ? std::ios::app : std::ios::trunc) {
        if (!out_) throw std::runtime_error("JsonlMetricsSink: cannot open " + path);
    }
    void emit(const nlohmann::ordered_json& event) override {
        out_ << event.dump() << "\n";
        out_.flush();
    }

private:
    std::ofstream out_;
};

}  // namespace rlsft
