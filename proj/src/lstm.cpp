#include "sigl/lstm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "sigl/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; big-endian hosts are unsupported");

namespace sigl::model {

using nlohmann::json;

AutoencoderModel init_model(int input_dim, int hidden_dim, int edge_type_count, std::uint64_t seed) {
    if (input_dim < 1 || hidden_dim < 1 || edge_type_count < 1)
        throw std::invalid_argument("init_model: dims must be >= 1");
    AutoencoderModel m;
    auto& enc = m.encoder;
    enc.input_dim = input_dim;
    enc.hidden_dim = hidden_dim;
    enc.edge_types = edge_type_count;

    Rng rng(seed);
    double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    auto fill = [&](Eigen::MatrixXd& mat, Eigen::Index r, Eigen::Index c) {
        mat.resize(r, c);
        for (Eigen::Index j = 0; j < c; ++j)
            for (Eigen::Index i = 0; i < r; ++i) mat(i, j) = rng.uniform(-bound, bound);
    };
    for (int g = 0; g < kGateCount; ++g) {
        fill(enc.w[g], hidden_dim, input_dim);
        enc.u[g].resize(edge_type_count);
        for (int t = 0; t < edge_type_count; ++t) fill(enc.u[g][t], hidden_dim, hidden_dim);
        enc.b[g] = Eigen::VectorXd::Zero(hidden_dim);
    }
    enc.b[kGateF].setOnes();

    fill(m.decoder.w1, hidden_dim, hidden_dim);
    m.decoder.b1 = Eigen::VectorXd::Zero(hidden_dim);
    fill(m.decoder.w2, input_dim, hidden_dim);
    m.decoder.b2 = Eigen::VectorXd::Zero(input_dim);
    m.meta.seed = seed;
    return m;
}

namespace {

inline Eigen::ArrayXd sigmoid(const Eigen::VectorXd& x) {
    return 1.0 / (1.0 + (-x.array()).exp());
}

struct GraphLayout {
    std::vector<NodeRef> order;
    std::map<NodeRef, int> index;
    // preds[j]: (predecessor topo index, edge type), sorted canonically.
    std::vector<std::vector<std::pair<int, int>>> preds;
    std::vector<Eigen::VectorXd> x;
    std::vector<bool> is_process;
};

GraphLayout layout_graph(const Sig& sig, const Embeddings& embeddings, int input_dim) {
    GraphLayout g;
    g.order = graph::topological_order(sig);
    for (std::size_t i = 0; i < g.order.size(); ++i) g.index[g.order[i]] = static_cast<int>(i);
    g.preds.resize(g.order.size());
    for (const auto& e : sig.edges)
        g.preds[g.index.at(e.dst)].emplace_back(g.index.at(e.src), e.edge_type);
    for (auto& p : g.preds) std::sort(p.begin(), p.end());
    g.x.reserve(g.order.size());
    g.is_process.reserve(g.order.size());
    for (const auto& ref : g.order) {
        auto it = embeddings.find(ref);
        if (it == embeddings.end()) throw MissingEmbedding(ref);
        if (it->second.size() != input_dim)
            throw std::invalid_argument("embedding dimension mismatch");
        g.x.push_back(it->second);
        g.is_process.push_back(sig.attr(ref).kind == graph::EntityKind::Process);
    }
    return g;
}

struct NodeCache {
    Eigen::VectorXd i, o, u, c, h, tc;
    std::vector<Eigen::VectorXd> f;  // per predecessor, canonical order
};

void forward_node(const GraphLstmParams& enc, const GraphLayout& g, int j,
                  const std::vector<NodeCache>& done, NodeCache& out) {
    const Eigen::VectorXd& x = g.x[j];
    Eigen::VectorXd pre_i = enc.w[kGateI] * x + enc.b[kGateI];
    Eigen::VectorXd pre_o = enc.w[kGateO] * x + enc.b[kGateO];
    Eigen::VectorXd pre_u = enc.w[kGateU] * x + enc.b[kGateU];
    Eigen::VectorXd pre_f_base = enc.w[kGateF] * x + enc.b[kGateF];
    for (const auto& [pi, type] : g.preds[j]) {
        const Eigen::VectorXd& hp = done[pi].h;
        pre_i += enc.u[kGateI][type] * hp;
        pre_o += enc.u[kGateO][type] * hp;
        pre_u += enc.u[kGateU][type] * hp;
    }
    out.i = sigmoid(pre_i);
    out.o = sigmoid(pre_o);
    out.u = pre_u.array().tanh();
    out.c = out.i.cwiseProduct(out.u);
    out.f.clear();
    for (const auto& [pi, type] : g.preds[j]) {
        Eigen::VectorXd f = sigmoid(pre_f_base + enc.u[kGateF][type] * done[pi].h);
        out.c += f.cwiseProduct(done[pi].c);
        out.f.push_back(std::move(f));
    }
    out.tc = out.c.array().tanh();
    out.h = out.o.cwiseProduct(out.tc);
}

std::vector<NodeCache> forward_graph(const AutoencoderModel& model, const GraphLayout& g) {
    std::vector<NodeCache> cache(g.order.size());
    for (std::size_t j = 0; j < g.order.size(); ++j)
        forward_node(model.encoder, g, static_cast<int>(j), cache, cache[j]);
    return cache;
}

}  // namespace

std::map<NodeRef, NodeState> encode(const AutoencoderModel& model, const Sig& sig,
                                    const Embeddings& embeddings) {
    GraphLayout g = layout_graph(sig, embeddings, model.input_dim());
    auto cache = forward_graph(model, g);
    std::map<NodeRef, NodeState> out;
    for (std::size_t j = 0; j < g.order.size(); ++j)
        out[g.order[j]] = NodeState{cache[j].h, cache[j].c};
    return out;
}

Eigen::VectorXd decode(const AutoencoderModel& model, const Eigen::VectorXd& h) {
    Eigen::VectorXd z1 = model.decoder.w1 * h + model.decoder.b1;
    Eigen::VectorXd a1 = z1.cwiseMax(0.0);
    return model.decoder.w2 * a1 + model.decoder.b2;
}

std::map<NodeRef, double> node_losses(const AutoencoderModel& model, const Sig& sig,
                                      const Embeddings& embeddings) {
    GraphLayout g = layout_graph(sig, embeddings, model.input_dim());
    auto cache = forward_graph(model, g);
    std::map<NodeRef, double> out;
    double d = static_cast<double>(model.input_dim());
    for (std::size_t j = 0; j < g.order.size(); ++j) {
        if (!g.is_process[j]) continue;
        Eigen::VectorXd r = decode(model, cache[j].h) - g.x[j];
        out[g.order[j]] = r.squaredNorm() / d;
    }
    return out;
}

Gradients Gradients::zeros_like(const AutoencoderModel& model) {
    Gradients g;
    const auto& enc = model.encoder;
    g.enc.input_dim = enc.input_dim;
    g.enc.hidden_dim = enc.hidden_dim;
    g.enc.edge_types = enc.edge_types;
    for (int gate = 0; gate < kGateCount; ++gate) {
        g.enc.w[gate] = Eigen::MatrixXd::Zero(enc.w[gate].rows(), enc.w[gate].cols());
        g.enc.b[gate] = Eigen::VectorXd::Zero(enc.b[gate].size());
        g.enc.u[gate].resize(enc.u[gate].size());
        for (std::size_t t = 0; t < enc.u[gate].size(); ++t)
            g.enc.u[gate][t] = Eigen::MatrixXd::Zero(enc.u[gate][t].rows(), enc.u[gate][t].cols());
    }
    g.dec.w1 = Eigen::MatrixXd::Zero(model.decoder.w1.rows(), model.decoder.w1.cols());
    g.dec.b1 = Eigen::VectorXd::Zero(model.decoder.b1.size());
    g.dec.w2 = Eigen::MatrixXd::Zero(model.decoder.w2.rows(), model.decoder.w2.cols());
    g.dec.b2 = Eigen::VectorXd::Zero(model.decoder.b2.size());
    return g;
}

std::vector<TensorView> tensor_views(GraphLstmParams& enc, DecoderParams& dec) {
    std::vector<TensorView> views;
    const char* gate_names[kGateCount] = {"i", "f", "o", "u"};
    for (int g = 0; g < kGateCount; ++g)
        views.push_back({std::string("enc.w_") + gate_names[g], enc.w[g].data(),
                         static_cast<std::size_t>(enc.w[g].size()), enc.w[g].rows(), enc.w[g].cols()});
    for (int g = 0; g < kGateCount; ++g)
        for (std::size_t t = 0; t < enc.u[g].size(); ++t)
            views.push_back({std::string("enc.u_") + gate_names[g] + "_" + std::to_string(t),
                             enc.u[g][t].data(), static_cast<std::size_t>(enc.u[g][t].size()),
                             enc.u[g][t].rows(), enc.u[g][t].cols()});
    for (int g = 0; g < kGateCount; ++g)
        views.push_back({std::string("enc.b_") + gate_names[g], enc.b[g].data(),
                         static_cast<std::size_t>(enc.b[g].size()), enc.b[g].size(), 1});
    views.push_back({"dec.w1", dec.w1.data(), static_cast<std::size_t>(dec.w1.size()), dec.w1.rows(),
                     dec.w1.cols()});
    views.push_back({"dec.b1", dec.b1.data(), static_cast<std::size_t>(dec.b1.size()), dec.b1.size(), 1});
    views.push_back({"dec.w2", dec.w2.data(), static_cast<std::size_t>(dec.w2.size()), dec.w2.rows(),
                     dec.w2.cols()});
    views.push_back({"dec.b2", dec.b2.data(), static_cast<std::size_t>(dec.b2.size()), dec.b2.size(), 1});
    return views;
}

void Gradients::add(const Gradients& other, double s) {
    auto mine = tensor_views(enc, dec);
    auto theirs = tensor_views(const_cast<GraphLstmParams&>(other.enc),
                               const_cast<DecoderParams&>(other.dec));
    for (std::size_t i = 0; i < mine.size(); ++i)
        for (std::size_t k = 0; k < mine[i].size; ++k) mine[i].data[k] += s * theirs[i].data[k];
}

void Gradients::scale(double s) {
    for (auto& v : tensor_views(enc, dec))
        for (std::size_t k = 0; k < v.size; ++k) v.data[k] *= s;
}

double graph_loss_and_gradients(const AutoencoderModel& model, const Sig& sig,
                                const Embeddings& embeddings, Gradients& grads) {
    GraphLayout g = layout_graph(sig, embeddings, model.input_dim());
    auto cache = forward_graph(model, g);
    const auto n = g.order.size();
    const double d = static_cast<double>(model.input_dim());

    std::size_t n_proc = 0;
    for (std::size_t j = 0; j < n; ++j)
        if (g.is_process[j]) ++n_proc;
    if (n_proc == 0) return 0.0;
    const double p = static_cast<double>(n_proc);

    std::vector<Eigen::VectorXd> dh(n, Eigen::VectorXd::Zero(model.hidden_dim()));
    std::vector<Eigen::VectorXd> dc(n, Eigen::VectorXd::Zero(model.hidden_dim()));

    // Decoder losses and backprop into h.
    double total_loss = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (!g.is_process[j]) continue;
        const Eigen::VectorXd& h = cache[j].h;
        Eigen::VectorXd z1 = model.decoder.w1 * h + model.decoder.b1;
        Eigen::VectorXd a1 = z1.cwiseMax(0.0);
        Eigen::VectorXd y = model.decoder.w2 * a1 + model.decoder.b2;
        Eigen::VectorXd r = y - g.x[j];
        total_loss += r.squaredNorm() / d;

        Eigen::VectorXd dy = (2.0 / (d * p)) * r;
        grads.dec.w2 += dy * a1.transpose();
        grads.dec.b2 += dy;
        Eigen::VectorXd da1 = model.decoder.w2.transpose() * dy;
        Eigen::VectorXd dz1 = da1.cwiseProduct((z1.array() > 0.0).cast<double>().matrix());
        grads.dec.w1 += dz1 * h.transpose();
        grads.dec.b1 += dz1;
        dh[j] += model.decoder.w1.transpose() * dz1;
    }

    const auto& enc = model.encoder;
    for (std::size_t jj = n; jj-- > 0;) {
        int j = static_cast<int>(jj);
        const NodeCache& nc = cache[jj];
        const Eigen::VectorXd& gh = dh[jj];
        Eigen::ArrayXd one_minus_tc2 = 1.0 - nc.tc.array().square();
        Eigen::VectorXd gc = dc[jj] + (gh.array() * nc.o.array() * one_minus_tc2).matrix();

        Eigen::VectorXd go_pre = (gh.array() * nc.tc.array() * nc.o.array() * (1.0 - nc.o.array())).matrix();
        Eigen::VectorXd gi_pre = (gc.array() * nc.u.array() * nc.i.array() * (1.0 - nc.i.array())).matrix();
        Eigen::VectorXd gu_pre = (gc.array() * nc.i.array() * (1.0 - nc.u.array().square())).matrix();

        const Eigen::VectorXd& x = g.x[jj];
        grads.enc.w[kGateI] += gi_pre * x.transpose();
        grads.enc.w[kGateO] += go_pre * x.transpose();
        grads.enc.w[kGateU] += gu_pre * x.transpose();
        grads.enc.b[kGateI] += gi_pre;
        grads.enc.b[kGateO] += go_pre;
        grads.enc.b[kGateU] += gu_pre;

        for (std::size_t pk = 0; pk < g.preds[j].size(); ++pk) {
            auto [pi, type] = g.preds[j][pk];
            const Eigen::VectorXd& hp = cache[pi].h;
            const Eigen::VectorXd& cp = cache[pi].c;
            const Eigen::VectorXd& f = nc.f[pk];

            Eigen::VectorXd gf_pre = (gc.array() * cp.array() * f.array() * (1.0 - f.array())).matrix();
            grads.enc.w[kGateF] += gf_pre * x.transpose();
            grads.enc.b[kGateF] += gf_pre;
            grads.enc.u[kGateF][type] += gf_pre * hp.transpose();
            grads.enc.u[kGateI][type] += gi_pre * hp.transpose();
            grads.enc.u[kGateO][type] += go_pre * hp.transpose();
            grads.enc.u[kGateU][type] += gu_pre * hp.transpose();

            dh[pi] += enc.u[kGateF][type].transpose() * gf_pre;
            dh[pi] += enc.u[kGateI][type].transpose() * gi_pre;
            dh[pi] += enc.u[kGateO][type].transpose() * go_pre;
            dh[pi] += enc.u[kGateU][type].transpose() * gu_pre;
            dc[pi] += gc.cwiseProduct(f);
        }
    }
    return total_loss / p;
}

double graph_loss(const AutoencoderModel& model, const Sig& sig, const Embeddings& embeddings) {
    auto losses = node_losses(model, sig, embeddings);
    if (losses.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [ref, l] : losses) sum += l;
    return sum / static_cast<double>(losses.size());
}

namespace {

double mean_validation_loss(const AutoencoderModel& model, const std::vector<GraphSample>& val) {
    double sum = 0.0;
    for (const auto& s : val) sum += graph_loss(model, *s.sig, *s.embeddings);
    return sum / static_cast<double>(val.size());
}

}  // namespace

void train(AutoencoderModel& model, const std::vector<GraphSample>& graphs,
           const std::vector<GraphSample>& validation, const TrainParams& params) {
    if (graphs.empty()) throw std::invalid_argument("train: no graphs");

    Gradients m_state = Gradients::zeros_like(model);
    Gradients v_state = Gradients::zeros_like(model);
    auto m_views = tensor_views(m_state.enc, m_state.dec);
    auto v_views = tensor_views(v_state.enc, v_state.dec);
    auto p_views = tensor_views(model.encoder, model.decoder);

    Rng rng(params.seed);
    std::vector<std::size_t> perm(graphs.size());
    long step = 0;
    double best_val = std::numeric_limits<double>::infinity();
    AutoencoderModel best;
    model.meta.loss_curve.clear();
    model.meta.validation_curve.clear();

    auto trim_count = static_cast<std::size_t>(params.trim_fraction * static_cast<double>(graphs.size()));

    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        if (trim_count > 0) {
            // Robustness to label noise: graphs whose loss ranks in the top
            // trim_fraction this epoch are excluded from the updates, so a
            // small share of anomalous training graphs cannot be memorized.
            // Rank by the descending per-node loss profile, compared
            // lexicographically: one anomalous node in a large graph barely
            // moves the mean but tops the profile, and a graph with an extra
            // bad node strictly outranks a twin that shares its worst nodes.
            std::vector<std::pair<std::vector<double>, std::size_t>> ranked(graphs.size());
            for (std::size_t i = 0; i < graphs.size(); ++i) {
                std::vector<double> profile;
                for (const auto& [ref, l] : node_losses(model, *graphs[i].sig, *graphs[i].embeddings))
                    profile.push_back(l);
                std::sort(profile.rbegin(), profile.rend());
                ranked[i] = {std::move(profile), i};
            }
            std::sort(ranked.begin(), ranked.end());
            perm.resize(graphs.size() - trim_count);
            for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = ranked[i].second;
            std::sort(perm.begin(), perm.end());
        } else {
            perm.resize(graphs.size());
            for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        }
        rng.shuffle(perm);

        double epoch_loss = 0.0;
        std::size_t counted = 0;
        for (std::size_t start = 0; start < perm.size(); start += params.batch_size) {
            std::size_t stop = std::min(perm.size(), start + params.batch_size);
            Gradients grads = Gradients::zeros_like(model);
            for (std::size_t i = start; i < stop; ++i) {
                const GraphSample& s = graphs[perm[i]];
                double loss = graph_loss_and_gradients(model, *s.sig, *s.embeddings, grads);
                epoch_loss += loss;
                ++counted;
            }
            grads.scale(1.0 / static_cast<double>(stop - start));

            ++step;
            double bc1 = 1.0 - std::pow(params.adam_beta1, step);
            double bc2 = 1.0 - std::pow(params.adam_beta2, step);
            auto g_views = tensor_views(grads.enc, grads.dec);
            for (std::size_t t = 0; t < p_views.size(); ++t) {
                for (std::size_t k = 0; k < p_views[t].size; ++k) {
                    double g = g_views[t].data[k];
                    double& m = m_views[t].data[k];
                    double& v = v_views[t].data[k];
                    m = params.adam_beta1 * m + (1.0 - params.adam_beta1) * g;
                    v = params.adam_beta2 * v + (1.0 - params.adam_beta2) * g * g;
                    p_views[t].data[k] -= params.learning_rate * (m / bc1) /
                                          (std::sqrt(v / bc2) + params.adam_epsilon);
                }
            }
        }
        double mean_loss = epoch_loss / static_cast<double>(counted);
        if (!std::isfinite(mean_loss)) throw NonFiniteLoss(epoch);
        model.meta.loss_curve.push_back(mean_loss);
        model.meta.epochs_trained = epoch + 1;

        if (!validation.empty()) {
            double val = mean_validation_loss(model, validation);
            model.meta.validation_curve.push_back(val);
            if (val < best_val) {
                best_val = val;
                best = model;
                best.meta.best_epoch = epoch;
            }
        }
    }
    if (!validation.empty()) {
        auto curve = model.meta.loss_curve;
        auto vcurve = model.meta.validation_curve;
        int trained = model.meta.epochs_trained;
        model = best;
        model.meta.loss_curve = curve;
        model.meta.validation_curve = vcurve;
        model.meta.epochs_trained = trained;
    }
}

double grad_check(const AutoencoderModel& model, const Sig& sig, const Embeddings& embeddings,
                  int samples_per_tensor, double h, std::uint64_t seed,
                  const std::function<void(Gradients&)>& corrupt) {
    Gradients grads = Gradients::zeros_like(model);
    graph_loss_and_gradients(model, sig, embeddings, grads);
    if (corrupt) corrupt(grads);
    auto g_views = tensor_views(grads.enc, grads.dec);

    AutoencoderModel probe = model;
    auto p_views = tensor_views(probe.encoder, probe.decoder);

    Rng rng(seed);
    double max_rel = 0.0;
    for (std::size_t t = 0; t < p_views.size(); ++t) {
        for (int s = 0; s < samples_per_tensor; ++s) {
            std::size_t k = static_cast<std::size_t>(rng.next_below(p_views[t].size));
            double saved = p_views[t].data[k];
            p_views[t].data[k] = saved + h;
            double lp = graph_loss(probe, sig, embeddings);
            p_views[t].data[k] = saved - h;
            double lm = graph_loss(probe, sig, embeddings);
            p_views[t].data[k] = saved;

            double numeric = (lp - lm) / (2.0 * h);
            double analytic = g_views[t].data[k];
            double denom = std::abs(numeric) + std::abs(analytic);
            double rel = denom == 0.0 ? 0.0 : std::abs(numeric - analytic) / std::max(denom, 1e-6);
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

void save_model(const AutoencoderModel& model, const std::string& path) {
    auto views = tensor_views(const_cast<GraphLstmParams&>(model.encoder),
                              const_cast<DecoderParams&>(model.decoder));
    json tensors = json::array();
    for (const auto& v : views)
        tensors.push_back({{"name", v.name}, {"rows", v.rows}, {"cols", v.cols}});
    json header{{"format", "sigl-autoencoder"},
                {"format_version", 1},
                {"input_dim", model.encoder.input_dim},
                {"hidden_dim", model.encoder.hidden_dim},
                {"edge_types", model.encoder.edge_types},
                {"seed", model.meta.seed},
                {"epochs_trained", model.meta.epochs_trained},
                {"best_epoch", model.meta.best_epoch},
                {"loss_curve", model.meta.loss_curve},
                {"validation_curve", model.meta.validation_curve},
                {"tensors", tensors}};
    std::string htext = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out.write("SIGLAE01", 8);
    std::uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (const auto& v : views)
        out.write(reinterpret_cast<const char*>(v.data),
                  static_cast<std::streamsize>(v.size * sizeof(double)));
    if (!out) throw std::runtime_error("model write failed: " + path);
}

AutoencoderModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "SIGLAE01", 8) != 0)
        throw std::runtime_error("bad model file magic: " + path);
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    json header = json::parse(htext);

    AutoencoderModel model = init_model(header.at("input_dim").get<int>(),
                                        header.at("hidden_dim").get<int>(),
                                        header.at("edge_types").get<int>(), 0);
    model.meta.seed = header.at("seed").get<std::uint64_t>();
    model.meta.epochs_trained = header.at("epochs_trained").get<int>();
    model.meta.best_epoch = header.at("best_epoch").get<int>();
    model.meta.loss_curve = header.at("loss_curve").get<std::vector<double>>();
    model.meta.validation_curve = header.at("validation_curve").get<std::vector<double>>();

    auto views = tensor_views(model.encoder, model.decoder);
    const auto& tensors = header.at("tensors");
    if (tensors.size() != views.size()) throw std::runtime_error("model tensor count mismatch");
    for (std::size_t i = 0; i < views.size(); ++i) {
        const auto& t = tensors[i];
        if (t.at("name").get<std::string>() != views[i].name ||
            t.at("rows").get<Eigen::Index>() != views[i].rows ||
            t.at("cols").get<Eigen::Index>() != views[i].cols)
            throw std::runtime_error("model tensor shape mismatch at " + views[i].name);
        in.read(reinterpret_cast<char*>(views[i].data),
                static_cast<std::streamsize>(views[i].size * sizeof(double)));
    }
    if (!in) throw std::runtime_error("model file truncated: " + path);
    return model;
}

}  // namespace sigl::model
