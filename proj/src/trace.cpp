#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "clusterless/simkernel.hpp"

namespace clusterless {

BandwidthTrace::BandwidthTrace(std::vector<std::pair<double, double>> samples, double phase_shift)
    : samples_(std::move(samples)), phase_(phase_shift) {
    if (samples_.empty()) throw Error("bandwidth trace has no samples");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        if (!(samples_[i].second > 0)) throw Error("bandwidth trace rates must be positive");
        if (i > 0 && !(samples_[i].first > samples_[i - 1].first)) {
            throw Error("bandwidth trace timestamps must be strictly increasing");
        }
    }
}

BandwidthTrace BandwidthTrace::constant(double rate) { return BandwidthTrace({{0.0, rate}}); }

BandwidthTrace BandwidthTrace::load(const std::filesystem::path& path, double phase_shift) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open bandwidth trace " + path.string());
    std::vector<std::pair<double, double>> samples;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double ts, rate;
        if (!(ls >> ts)) continue;
        if (!(ls >> rate)) throw Error(path.string() + ":" + std::to_string(lineno) + ": expected 'timestamp rate'");
        std::string extra;
        if (ls >> extra) throw Error(path.string() + ":" + std::to_string(lineno) + ": trailing data");
        samples.emplace_back(ts, rate);
    }
    return BandwidthTrace(std::move(samples), phase_shift);
}

void BandwidthTrace::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write bandwidth trace " + path.string());
    out << std::setprecision(17);
    for (const auto& [ts, rate] : samples_) out << ts << ' ' << rate << '\n';
}

double BandwidthTrace::rate_at(Time t) const {
    if (samples_.empty()) throw Error("lookup on an empty bandwidth trace");
    const double x = t.to_seconds() + phase_;
    auto it = std::upper_bound(samples_.begin(), samples_.end(), x,
                               [](double v, const std::pair<double, double>& s) { return v < s.first; });
    if (it == samples_.begin()) return samples_.front().second;
    return std::prev(it)->second;
}

std::optional<Time> BandwidthTrace::next_change(Time t) const {
    const double x = t.to_seconds() + phase_;
    auto it = std::upper_bound(samples_.begin(), samples_.end(), x,
                               [](double v, const std::pair<double, double>& s) { return v < s.first; });
    if (it == samples_.end()) return std::nullopt;
    Time c = Time::seconds(it->first - phase_);
    if (c <= t) c = t + Time::micros(1);
    return c;
}

BandwidthTrace BandwidthTrace::shifted(double phase) const {
    BandwidthTrace out = *this;
    out.phase_ += phase;
    return out;
}

BandwidthTrace BandwidthTrace::scaled(double factor) const {
    if (!(factor > 0)) throw Error("bandwidth scale must be positive");
    BandwidthTrace out = *this;
    for (auto& s : out.samples_) s.second *= factor;
    return out;
}

Time transfer(double output_mb, const BandwidthTrace& link, Time t0) {
    if (output_mb < 0) throw Error("transfer size must be non-negative");
    Time t = t0;
    double left = output_mb;
    while (left > 0) {
        const double rate = link.rate_at(t);
        const Time done = t + Time::seconds_ceil(left / rate);
        auto change = link.next_change(t);
        if (!change || done <= *change) return done;
        left -= rate * (*change - t).to_seconds();
        t = *change;
    }
    return t;
}

} // namespace clusterless
