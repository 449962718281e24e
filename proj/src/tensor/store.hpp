#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/rng.hpp"

namespace bplab::tensor {

using Shape = std::vector<int>;

inline size_t numel(const Shape& s) {
    size_t n = 1;
    for (int d : s) {
        check(d >= 0, ErrorCode::ShapeMismatch, "negative dim");
        n *= static_cast<size_t>(d);
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

template <class Real>
struct ParamTensor {
    std::string name;
    Shape shape;
    std::vector<Real> value;
    std::vector<Real> grad;
    std::vector<Real> m, v; // Adam moments, allocated on first step
    bool frozen = false;

    size_t count() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), Real(0)); }
};

// Named parameters in deterministic (lexicographic) iteration order.
template <class Real>
class ParamStore {
public:
    explicit ParamStore(uint64_t init_seed = 0) : init_seed_(init_seed) {}

    uint64_t init_seed() const { return init_seed_; }

    ParamTensor<Real>* create(const std::string& name, const Shape& shape) {
        check(!params_.count(name), ErrorCode::InvalidArgument, "duplicate param: " + name);
        auto p = std::make_unique<ParamTensor<Real>>();
        p->name = name;
        p->shape = shape;
        p->value.assign(numel(shape), Real(0));
        p->grad.assign(numel(shape), Real(0));
        ParamTensor<Real>* raw = p.get();
        params_[name] = std::move(p);
        return raw;
    }

    // Gaussian fan-in init, stream keyed by tensor name so layout changes
    // elsewhere never shift this tensor's draw.
    ParamTensor<Real>* create_init(const std::string& name, const Shape& shape, int fan_in) {
        ParamTensor<Real>* p = create(name, shape);
        Rng rng = Rng::stream(init_seed_, "init", fnv1a(name));
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
        for (Real& x : p->value) x = static_cast<Real>(rng.normal() * scale);
        return p;
    }

    ParamTensor<Real>* get(const std::string& name) {
        auto it = params_.find(name);
        check(it != params_.end(), ErrorCode::InvalidArgument, "unknown param: " + name);
        return it->second.get();
    }
    const ParamTensor<Real>* get(const std::string& name) const {
        auto it = params_.find(name);
        check(it != params_.end(), ErrorCode::InvalidArgument, "unknown param: " + name);
        return it->second.get();
    }
    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    void freeze_prefix(const std::string& prefix) {
        for (auto& [name, p] : params_)
            if (name.rfind(prefix, 0) == 0) p->frozen = true;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [name, p] : params_) out.push_back(name);
        return out;
    }
    std::vector<std::string> frozen_names() const {
        std::vector<std::string> out;
        for (const auto& [name, p] : params_)
            if (p->frozen) out.push_back(name);
        return out;
    }

    size_t total_count() const {
        size_t n = 0;
        for (const auto& [name, p] : params_) n += p->count();
        return n;
    }

    void zero_grads() {
        for (auto& [name, p] : params_) p->zero_grad();
    }

    // FNV over the raw value bytes of selected params, iteration order fixed.
    uint64_t value_hash(const std::string& prefix = "") const {
        uint64_t h = 0xcbf29ce484222325ull;
        for (const auto& [name, p] : params_) {
            if (!prefix.empty() && name.rfind(prefix, 0) != 0) continue;
            h = fnv1a(name.data(), name.size(), h);
            h = fnv1a(p->value.data(), p->value.size() * sizeof(Real), h);
        }
        return h;
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    uint64_t init_seed_;
    std::map<std::string, std::unique_ptr<ParamTensor<Real>>> params_;
};

// Standard Adam with bias correction; frozen params skipped, grads cleared.
template <class Real>
class Adam {
public:
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void step(ParamStore<Real>& store) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        for (auto& [name, p] : store) {
            if (p->frozen) {
                p->zero_grad();
                continue;
            }
            if (p->m.empty()) {
                p->m.assign(p->count(), Real(0));
                p->v.assign(p->count(), Real(0));
            }
            for (size_t i = 0; i < p->count(); ++i) {
                const double g = static_cast<double>(p->grad[i]);
                const double m = beta1 * static_cast<double>(p->m[i]) + (1.0 - beta1) * g;
                const double v = beta2 * static_cast<double>(p->v[i]) + (1.0 - beta2) * g * g;
                p->m[i] = static_cast<Real>(m);
                p->v[i] = static_cast<Real>(v);
                const double update = (m / bc1) / (std::sqrt(v / bc2) + eps);
                p->value[i] = static_cast<Real>(static_cast<double>(p->value[i]) - lr * update);
            }
            p->zero_grad();
        }
    }

    int64_t steps() const { return t_; }

private:
    int64_t t_ = 0;
};

} // namespace bplab::tensor
