#include "rlsft/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace rlsft {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

PolicyParams::PolicyParams(int vocab_, int d_)
    : vocab(vocab_),
      d(d_),
      E(size_t(vocab_) * d_, 0.0),
      W(size_t(d_) * d_, 0.0),
      b1(d_, 0.0),
      U(size_t(d_) * vocab_, 0.0),
      b2(vocab_, 0.0) {
    if (vocab_ <= 0 || d_ <= 0) throw std::invalid_argument("PolicyParams: nonpositive shape");
}

std::vector<double> PolicyParams::flat() const {
    std::vector<double> out;
    out.reserve(param_count());
    out.insert(out.end(), E.begin(), E.end());
    out.insert(out.end(), W.begin(), W.end());
    out.insert(out.end(), b1.begin(), b1.end());
    out.insert(out.end(), U.begin(), U.end());
    out.insert(out.end(), b2.begin(), b2.end());
    return out;
}

void PolicyParams::set_flat(const std::vector<double>& v) {
    if (v.size() != param_count()) throw std::invalid_argument("set_flat: length mismatch");
    auto it = v.begin();
    auto take = [&](std::vector<double>& dst) {
        std::copy(it, it + dst.size(), dst.begin());
        it += dst.size();
    };
    take(E);
    take(W);
    take(b1);
    take(U);
    take(b2);
}

PolicyParams init_params(int vocab, int d, uint64_t seed) {
    PolicyParams p(vocab, d);
    Rng rng(seed);
    auto fill = [&](std::vector<double>& v) {
        for (double& x : v) x = rng.uniform_real(-0.08, 0.08);
    };
    fill(p.E);
    fill(p.W);
    fill(p.b1);
    fill(p.U);
    fill(p.b2);
    return p;
}

static void check_context(const PolicyParams& p, const std::vector<int>& ctx) {
    if (ctx.empty()) throw std::invalid_argument("forward: empty context");
    for (int t : ctx)
        if (t < 0 || t >= p.vocab) throw std::out_of_range("forward: token id out of range");
}

std::vector<double> logits(const PolicyParams& p, const std::vector<int>& ctx) {
    check_context(p, ctx);
    int d = p.d, V = p.vocab;
    std::vector<double> h0(d, 0.0);
    for (int t : ctx) {
        const double* row = &p.E[size_t(t) * d];
        for (int k = 0; k < d; ++k) h0[k] += row[k];
    }
    double inv = 1.0 / double(ctx.size());
    for (int k = 0; k < d; ++k) h0[k] *= inv;

    std::vector<double> h(d);
    for (int j = 0; j < d; ++j) {
        double a = p.b1[j];
        const double* wrow = &p.W[size_t(j) * d];
        for (int k = 0; k < d; ++k) a += wrow[k] * h0[k];
        h[j] = std::tanh(a);
    }

    std::vector<double> z(p.b2);
    for (int j = 0; j < d; ++j) {
        const double* urow = &p.U[size_t(j) * V];
        double hj = h[j];
        for (int v = 0; v < V; ++v) z[v] += urow[v] * hj;
    }
    return z;
}

static TokenDistribution softmax(std::vector<double> z, double temperature) {
    if (temperature <= 0.0) throw std::invalid_argument("softmax: temperature must be > 0");
    for (double& x : z) x /= temperature;
    double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& x : z) {
        x -= mx;
        sum += std::exp(x);
    }
    double lse = std::log(sum);
    TokenDistribution out;
    out.logprobs.resize(z.size());
    out.probs.resize(z.size());
    for (size_t i = 0; i < z.size(); ++i) {
        out.logprobs[i] = z[i] - lse;
        out.probs[i] = std::exp(out.logprobs[i]);
    }
    return out;
}

TokenDistribution forward(const PolicyParams& p, const std::vector<int>& ctx, double temperature) {
    return softmax(logits(p, ctx), temperature);
}

int argmax_lowest(const std::vector<double>& v) {
    int best = 0;
    for (size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = int(i);
    return best;
}

static int sample_categorical(const std::vector<double>& probs, Rng& rng) {
    double u = rng.next_double();
    double c = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        c += probs[i];
        if (u < c) return int(i);
    }
    return int(probs.size()) - 1;
}

std::vector<int> sample_sequence(const PolicyParams& p, const std::vector<int>& prompt,
                                 int max_steps, double temperature, Rng& rng) {
    if (max_steps < 1) throw std::invalid_argument("sample_sequence: max_steps < 1");
    std::vector<int> ctx = prompt;
    std::vector<int> out;
    out.reserve(max_steps);
    for (int s = 0; s < max_steps; ++s) {
        int tok;
        if (temperature == 0.0) {
            tok = argmax_lowest(logits(p, ctx));
        } else {
            tok = sample_categorical(forward(p, ctx, temperature).probs, rng);
        }
        out.push_back(tok);
        ctx.push_back(tok);
    }
    return out;
}

std::vector<double> sequence_logprob(const PolicyParams& p, const std::vector<int>& prompt,
                                     const std::vector<int>& generated, double temperature) {
    if (generated.empty()) throw std::invalid_argument("sequence_logprob: empty generation");
    std::vector<int> ctx = prompt;
    std::vector<double> out;
    out.reserve(generated.size());
    for (int tok : generated) {
        if (tok < 0 || tok >= p.vocab)
            throw std::out_of_range("sequence_logprob: token out of range");
        out.push_back(forward(p, ctx, temperature).logprobs[tok]);
        ctx.push_back(tok);
    }
    return out;
}

std::vector<double> grad_sequence_logprob(const PolicyParams& p, const std::vector<int>& prompt,
                                          const std::vector<int>& generated,
                                          const std::vector<double>& coeffs, double temperature) {
    if (coeffs.size() != generated.size())
        throw std::invalid_argument("grad_sequence_logprob: coefficient length mismatch");
    if (temperature <= 0.0)
        throw std::invalid_argument("grad_sequence_logprob: temperature must be > 0");
    int d = p.d, V = p.vocab;
    size_t offE = 0;
    size_t offW = offE + size_t(V) * d;
    size_t offb1 = offW + size_t(d) * d;
    size_t offU = offb1 + size_t(d);
    size_t offb2 = offU + size_t(d) * V;
    std::vector<double> g(p.param_count(), 0.0);

    std::vector<int> ctx = prompt;
    for (size_t t = 0; t < generated.size(); ++t) {
        int tok = generated[t];
        if (tok < 0 || tok >= V) throw std::out_of_range("grad_sequence_logprob: token");
        check_context(p, ctx);

        // re-run forward keeping intermediates
        std::vector<double> h0(d, 0.0);
        for (int c : ctx) {
            const double* row = &p.E[size_t(c) * d];
            for (int k = 0; k < d; ++k) h0[k] += row[k];
        }
        double inv = 1.0 / double(ctx.size());
        for (int k = 0; k < d; ++k) h0[k] *= inv;
        std::vector<double> h(d);
        for (int j = 0; j < d; ++j) {
            double a = p.b1[j];
            const double* wrow = &p.W[size_t(j) * d];
            for (int k = 0; k < d; ++k) a += wrow[k] * h0[k];
            h[j] = std::tanh(a);
        }
        std::vector<double> z(p.b2);
        for (int j = 0; j < d; ++j) {
            const double* urow = &p.U[size_t(j) * V];
            double hj = h[j];
            for (int v = 0; v < V; ++v) z[v] += urow[v] * hj;
        }
        TokenDistribution dist = softmax(z, temperature);

        // d(log p[tok]) / dz_v = (delta - p_v) / tau, scaled by coeff
        double scale = coeffs[t] / temperature;
        std::vector<double> dz(V);
        for (int v = 0; v < V; ++v) dz[v] = -dist.probs[v] * scale;
        dz[tok] += scale;

        for (int v = 0; v < V; ++v) g[offb2 + v] += dz[v];
        std::vector<double> dh(d, 0.0);
        for (int j = 0; j < d; ++j) {
            const double* urow = &p.U[size_t(j) * V];
            double* gu = &g[offU + size_t(j) * V];
            double hj = h[j], acc = 0.0;
            for (int v = 0; v < V; ++v) {
                gu[v] += hj * dz[v];
                acc += urow[v] * dz[v];
            }
            dh[j] = acc;
        }
        std::vector<double> da(d);
        for (int j = 0; j < d; ++j) da[j] = dh[j] * (1.0 - h[j] * h[j]);
        for (int j = 0; j < d; ++j) {
            g[offb1 + j] += da[j];
            double* gw = &g[offW + size_t(j) * d];
            for (int k = 0; k < d; ++k) gw[k] += da[j] * h0[k];
        }
        std::vector<double> dh0(d, 0.0);
        for (int j = 0; j < d; ++j) {
            const double* wrow = &p.W[size_t(j) * d];
            for (int k = 0; k < d; ++k) dh0[k] += wrow[k] * da[j];
        }
        for (int k = 0; k < d; ++k) dh0[k] *= inv;
        for (int c : ctx) {
            double* ge = &g[offE + size_t(c) * d];
            for (int k = 0; k < d; ++k) ge[k] += dh0[k];
        }

        ctx.push_back(tok);
    }
    return g;
}

double finite_diff_check(const PolicyParams& p, const std::vector<int>& prompt,
                         const std::vector<int>& generated, const std::vector<double>& coeffs,
                         double step, double temperature) {
    if (step <= 0.0) throw std::invalid_argument("finite_diff_check: step must be > 0");
    std::vector<double> analytic = grad_sequence_logprob(p, prompt, generated, coeffs, temperature);
    auto objective = [&](const PolicyParams& q) {
        std::vector<double> lp = sequence_logprob(q, prompt, generated, temperature);
        double s = 0.0;
        for (size_t t = 0; t < lp.size(); ++t) s += coeffs[t] * lp[t];
        return s;
    };
    PolicyParams q = p;
    std::vector<double> flat = p.flat();
    double worst = 0.0;
    for (size_t i = 0; i < flat.size(); ++i) {
        double orig = flat[i];
        flat[i] = orig + step;
        q.set_flat(flat);
        double fp = objective(q);
        flat[i] = orig - step;
        q.set_flat(flat);
        double fm = objective(q);
        flat[i] = orig;
        double numeric = (fp - fm) / (2.0 * step);
        double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-12});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    q.set_flat(flat);
    return worst;
}

static const uint32_t kCkptVersion = 1;

void save_checkpoint(const std::string& path, const PolicyParams& p, const std::string& stage) {
    if (stage != "base" && stage != "rl1" && stage != "sft" && stage != "rl2")
        throw std::invalid_argument("save_checkpoint: unknown stage tag " + stage);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    f.write("EDQW", 4);
    auto put_u32 = [&](uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_u64 = [&](uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); };
    put_u32(kCkptVersion);
    put_u32(uint32_t(stage.size()));
    f.write(stage.data(), std::streamsize(stage.size()));
    put_u32(uint32_t(p.vocab));
    put_u32(uint32_t(p.d));
    std::vector<double> flat = p.flat();
    put_u64(flat.size());
    f.write(reinterpret_cast<const char*>(flat.data()), std::streamsize(flat.size() * 8));
    if (!f) throw std::runtime_error("save_checkpoint: write failed on " + path);
}

std::pair<PolicyParams, std::string> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "EDQW", 4) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    auto get_u32 = [&] {
        uint32_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto get_u64 = [&] {
        uint64_t v = 0;
        f.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    uint32_t version = get_u32();
    if (version != kCkptVersion) throw std::runtime_error("load_checkpoint: unsupported version");
    uint32_t slen = get_u32();
    if (slen > 16) throw std::runtime_error("load_checkpoint: corrupt stage tag");
    std::string stage(slen, '\0');
    f.read(stage.data(), slen);
    uint32_t vocab = get_u32();
    uint32_t d = get_u32();
    uint64_t count = get_u64();
    PolicyParams p{int(vocab), int(d)};
    if (count != p.param_count()) throw std::runtime_error("load_checkpoint: shape mismatch");
    std::vector<double> flat(count);
    f.read(reinterpret_cast<char*>(flat.data()), std::streamsize(count * 8));
    if (!f) throw std::runtime_error("load_checkpoint: truncated file " + path);
    p.set_flat(flat);
    return {std::move(p), stage};
}

}  // namespace rlsft
