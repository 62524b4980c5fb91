// Copyright 2026 The maskpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "maskpipe/config.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

namespace maskpipe {

namespace {

std::string trim(const std::string& s)
{
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) {
        return {};
    }
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value)
{
    T out{};
    const auto* first = value.data();
    const auto* last = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) {
        throw std::invalid_argument("config: bad value for " + key + ": '" + value + "'");
    }
    return out;
}

std::string format_double(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void unit_interval(double v, const char* name)
{
    if (!(v > 0.0 && v < 1.0)) {
        throw std::invalid_argument(std::string("config: ") + name + " must be in (0,1)");
    }
}

}  // namespace

const char* to_string(BackendKind kind)
{
    return kind == BackendKind::Sidecar ? "sidecar" : "synthetic";
}

BackendKind parse_backend(const std::string& name)
{
    if (name == "synthetic") {
        return BackendKind::Synthetic;
    }
    if (name == "sidecar") {
        return BackendKind::Sidecar;
    }
    throw std::invalid_argument("config: unknown backend '" + name + "'");
}

void PipelineConfig::validate() const
{
    unit_interval(discard_thresh, "discard_thresh");
    unit_interval(merge_thresh, "merge_thresh");
    unit_interval(direct_match_iou, "direct_match_iou");
    unit_interval(epsilon, "epsilon");
    unit_interval(binarize_tau, "binarize_tau");
    if (prompt_step < 1 || prompt_step > track_interval) {
        throw std::invalid_argument("config: require 1 <= s_P <= s_T");
    }
    if (max_dim < 16) {
        throw std::invalid_argument("config: max_dim must be at least 16");
    }
    if (workers < 0) {
        throw std::invalid_argument("config: workers must be >= 0");
    }
}

TrackingParams PipelineConfig::tracking() const
{
    TrackingParams p;
    p.prompt_step = prompt_step;
    p.track_interval = track_interval;
    p.epsilon = epsilon;
    p.direct_match_iou = direct_match_iou;
    p.partial = postprocess();
    p.binarize_tau = binarize_tau;
    return p;
}

void PipelineConfig::set(const std::string& key, const std::string& value)
{
    if (key == "prompt") {
        prompt = value;
    } else if (key == "discard_thresh") {
        discard_thresh = parse_number<double>(key, value);
    } else if (key == "merge_thresh") {
        merge_thresh = parse_number<double>(key, value);
    } else if (key == "direct_match_iou") {
        direct_match_iou = parse_number<double>(key, value);
    } else if (key == "epsilon") {
        epsilon = parse_number<double>(key, value);
    } else if (key == "s_P") {
        prompt_step = parse_number<int>(key, value);
    } else if (key == "s_T") {
        track_interval = parse_number<int>(key, value);
    } else if (key == "binarize_tau") {
        binarize_tau = parse_number<double>(key, value);
    } else if (key == "max_dim") {
        max_dim = parse_number<int>(key, value);
    } else if (key == "backend") {
        backend = parse_backend(value);
    } else if (key == "seed") {
        if (value.empty()) {
            seed.reset();
        } else {
            seed = parse_number<std::uint64_t>(key, value);
        }
    } else if (key == "workers") {
        workers = parse_number<int>(key, value);
    } else {
        throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

PipelineConfig parse_config(const std::string& text, PipelineConfig base)
{
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: line " + std::to_string(lineno) + " is not key = value");
        }
        base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    base.validate();
    return base;
}

std::string config_to_text(const PipelineConfig& c)
{
    std::string out;
    auto line = [&](const char* key, const std::string& value) {
        out += key;
        out += " = ";
        out += value;
        out += '\n';
    };
    line("prompt", c.prompt);
    line("discard_thresh", format_double(c.discard_thresh));
    line("merge_thresh", format_double(c.merge_thresh));
    line("direct_match_iou", format_double(c.direct_match_iou));
    line("epsilon", format_double(c.epsilon));
    line("s_P", std::to_string(c.prompt_step));
    line("s_T", std::to_string(c.track_interval));
    line("binarize_tau", format_double(c.binarize_tau));
    line("max_dim", std::to_string(c.max_dim));
    line("backend", to_string(c.backend));
    line("seed", c.seed ? std::to_string(*c.seed) : std::string());
    line("workers", std::to_string(c.workers));
    return out;
}

}  // namespace maskpipe
