#pragma once

// Structured search traces. The planner emits one event per decision point;
// sinks either buffer them (tests, needed-call analysis) or stream them as
// JSON lines. Events use sorted-key JSON so traces are byte deterministic.

#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "verihtn/domain.hpp"

namespace verihtn {

struct TraceEvent {
    std::string kind;
    nlohmann::json fields; // flat object, kind-specific
};

class TraceSink {
public:
    virtual ~TraceSink() = default;
    virtual void emit(const TraceEvent& e) = 0;
};

class MemoryTrace : public TraceSink {
public:
    void emit(const TraceEvent& e) override { events_.push_back(e); }
    const std::vector<TraceEvent>& events() const { return events_; }
private:
    std::vector<TraceEvent> events_;
};

class JsonlTraceWriter : public TraceSink {
public:
    explicit JsonlTraceWriter(const std::string& path) : out_(path) {
        if (!out_) throw DomainError("cannot open trace file: " + path);
    }
    void emit(const TraceEvent& e) override {
        nlohmann::json line = e.fields;
        line["event"] = e.kind;
        out_ << line.dump() << "\n";
    }
    void flush() { out_.flush(); }
private:
    std::ofstream out_;
};

namespace trace_detail {

inline void emit(TraceSink* sink, const std::string& kind, nlohmann::json fields) {
    if (!sink) return;
    sink->emit(TraceEvent{kind, std::move(fields)});
}

} // namespace trace_detail

} // namespace verihtn
