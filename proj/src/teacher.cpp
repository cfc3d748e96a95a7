#include "advkd/teacher.hpp"

#include <cmath>

#include "advkd/checkpoint.hpp"
#include "advkd/error.hpp"
#include "advkd/optim.hpp"

namespace advkd::teacher {

using namespace advkd::kernels;
using advkd::diffusion::NoiseSchedule;

namespace {
bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }
}  // namespace

void TeacherConfig::validate() const {
    if (image_resolution < 8 || !is_power_of_two(image_resolution))
        throw ConfigError("teacher.image_resolution must be a power of two >= 8");
    if (channels < 1) throw ConfigError("teacher.channels must be positive");
    if (base_width < 1) throw ConfigError("teacher.base_width must be positive");
    if (channel_multipliers.empty())
        throw ConfigError("teacher.channel_multipliers must be non-empty");
    for (int m : channel_multipliers)
        if (m < 1) throw ConfigError("teacher.channel_multipliers must be positive");
    if (time_embedding_dim < 2 || time_embedding_dim % 2 != 0)
        throw ConfigError("teacher.time_embedding_dim must be even and >= 2");
    const int levels = (int)channel_multipliers.size();
    if (image_resolution % (1 << (levels - 1)) != 0)
        throw ConfigError("teacher: resolution not divisible across levels");
    if (T < 1) throw ConfigError("teacher.T must be >= 1");
}

NoiseSchedule TeacherConfig::schedule() const {
    return diffusion::make_linear_schedule(T, beta_start, beta_end);
}

TeacherUNet::TimeBlock::TimeBlock(const std::string& name, int cin, int cout,
                                  int temb_dim)
    : conv1(name + ".conv1", cin, cout, 3, 1, 1),
      conv2(name + ".conv2", cout, cout, 3, 1, 1),
      temb_proj(name + ".temb_proj", temb_dim, cout) {}

void TeacherUNet::TimeBlock::init(Rng& rng) {
    conv1.init_he(rng);
    conv2.init_he(rng);
    temb_proj.init_he(rng);
}

Tensor TeacherUNet::TimeBlock::forward(const Tensor& x, const Tensor& temb,
                                       bool cache) {
    Tensor a1 = conv1.forward(x, cache);
    Tensor tb = temb_proj.forward(temb, cache);
    Tensor s1 = nn::add_channel_bias(a1, tb);
    if (cache) s1_cache = s1;
    Tensor h1 = silu_forward(s1);
    Tensor a2 = conv2.forward(h1, cache);
    if (cache) a2_cache = a2;
    return silu_forward(a2);
}

Tensor TeacherUNet::TimeBlock::backward(const Tensor& gy, Tensor& temb_grad) {
    Tensor g2 = silu_backward(gy, a2_cache);
    Tensor gh1 = conv2.backward(g2);
    Tensor gs1 = silu_backward(gh1, s1_cache);
    Tensor gtb = nn::sum_spatial(gs1);
    Tensor gtemb = temb_proj.backward(gtb);
    add_inplace(temb_grad, gtemb);
    return conv1.backward(gs1);
}

TeacherUNet::TeacherUNet(const TeacherConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    const int L = (int)cfg_.channel_multipliers.size();
    widths_.resize((size_t)L);
    for (int i = 0; i < L; ++i)
        widths_[(size_t)i] = cfg_.base_width * cfg_.channel_multipliers[(size_t)i];
    const int td = cfg_.time_embedding_dim;

    time_lin1_ = nn::Linear("time_mlp.lin1", td, td);
    time_lin2_ = nn::Linear("time_mlp.lin2", td, td);
    conv_in_ = nn::Conv2d("conv_in", cfg_.channels, widths_[0], 3, 1, 1);
    conv_out_ = nn::Conv2d("conv_out", widths_[0], cfg_.channels, 3, 1, 1);

    enc_.reserve((size_t)L);
    for (int i = 0; i < L; ++i)
        enc_.emplace_back("enc" + std::to_string(i), widths_[(size_t)i],
                          widths_[(size_t)i], td);
    for (int i = 0; i + 1 < L; ++i)
        down_.emplace_back("down" + std::to_string(i), widths_[(size_t)i],
                           widths_[(size_t)i + 1], 3, 2, 1);
    mid_ = TimeBlock("mid", widths_[(size_t)L - 1], widths_[(size_t)L - 1], td);
    for (int i = 0; i + 1 < L; ++i) {
        up_conv_.emplace_back("up" + std::to_string(i), widths_[(size_t)i + 1],
                              widths_[(size_t)i], 3, 1, 1);
        dec_.emplace_back("dec" + std::to_string(i), 2 * widths_[(size_t)i],
                          widths_[(size_t)i], td);
    }

    Rng rng(init_seed);
    time_lin1_.init_he(rng);
    time_lin2_.init_he(rng);
    conv_in_.init_he(rng);
    for (auto& b : enc_) b.init(rng);
    for (auto& d : down_) d.init_he(rng);
    mid_.init(rng);
    for (auto& u : up_conv_) u.init_he(rng);
    for (auto& b : dec_) b.init(rng);
    conv_out_.init_zero();
}

Tensor TeacherUNet::forward(const Tensor& x, const std::vector<int>& t, bool cache) {
    if (x.rank() != 4 || x.dim(1) != cfg_.channels)
        throw ConfigError("teacher forward: expected (N," + std::to_string(cfg_.channels) +
                          ",H,W), got " + x.shape_str());
    if ((int)t.size() != x.dim(0))
        throw ConfigError("teacher forward: one timestep per sample required");
    const int L = (int)widths_.size();

    Tensor e = nn::sinusoidal_embedding(t, cfg_.time_embedding_dim);
    Tensor a1 = time_lin1_.forward(e, cache);
    if (cache) temb_a1_ = a1;
    Tensor temb = time_lin2_.forward(silu_forward(a1), cache);

    Tensor h = conv_in_.forward(x, cache);
    skip_cache_.assign((size_t)L, Tensor());
    std::vector<Tensor> skips((size_t)L);
    for (int i = 0; i < L; ++i) {
        h = enc_[(size_t)i].forward(h, temb, cache);
        skips[(size_t)i] = h;
        if (i + 1 < L) h = down_[(size_t)i].forward(h, cache);
    }
    h = mid_.forward(h, temb, cache);
    for (int i = L - 2; i >= 0; --i) {
        h = upsample2x_forward(h);
        h = up_conv_[(size_t)i].forward(h, cache);
        h = dec_[(size_t)i].forward(nn::concat_channels(h, skips[(size_t)i]), temb, cache);
    }
    if (cache) skip_cache_ = std::move(skips);
    return conv_out_.forward(h, cache);
}

void TeacherUNet::backward(const Tensor& grad_out) {
    const int L = (int)widths_.size();
    const int N = grad_out.dim(0);
    Tensor temb_grad({N, cfg_.time_embedding_dim});

    Tensor g = conv_out_.backward(grad_out);
    std::vector<Tensor> skip_grads((size_t)L);
    for (int i = 0; i <= L - 2; ++i) {
        Tensor g_concat = dec_[(size_t)i].backward(g, temb_grad);
        Tensor g_upper, g_skip;
        nn::split_channels(g_concat, widths_[(size_t)i], g_upper, g_skip);
        skip_grads[(size_t)i] = std::move(g_skip);
        Tensor g_up_in = up_conv_[(size_t)i].backward(g_upper);
        g = upsample2x_backward(g_up_in);
    }
    g = mid_.backward(g, temb_grad);
    for (int i = L - 1; i >= 0; --i) {
        Tensor g_enc_out;
        if (i == L - 1) {
            g_enc_out = std::move(g);
        } else {
            g_enc_out = down_[(size_t)i].backward(g);
            add_inplace(g_enc_out, skip_grads[(size_t)i]);
        }
        g = enc_[(size_t)i].backward(g_enc_out, temb_grad);
    }
    conv_in_.backward(g);

    Tensor gt = time_lin2_.backward(temb_grad);
    gt = silu_backward(gt, temb_a1_);
    time_lin1_.backward(gt);
}

template <typename F>
void TeacherUNet::for_each_layer(F&& f) {
    f(time_lin1_);
    f(time_lin2_);
    f(conv_in_);
    for (auto& b : enc_) {
        f(b.conv1);
        f(b.temb_proj);
        f(b.conv2);
    }
    for (auto& d : down_) f(d);
    f(mid_.conv1);
    f(mid_.temb_proj);
    f(mid_.conv2);
    for (auto& u : up_conv_) f(u);
    for (auto& b : dec_) {
        f(b.conv1);
        f(b.temb_proj);
        f(b.conv2);
    }
    f(conv_out_);
}

void TeacherUNet::visit_params(const nn::ParamFn& fn) {
    for_each_layer([&](auto& layer) { layer.visit_params(fn); });
}

void TeacherUNet::visit_state(const nn::StateFn& fn) {
    visit_params([&](nn::Param& p) { fn(p.name, p.value); });
}

std::vector<nn::Param*> TeacherUNet::params() {
    std::vector<nn::Param*> ps;
    visit_params([&](nn::Param& p) { ps.push_back(&p); });
    return ps;
}

size_t TeacherUNet::param_count() {
    size_t n = 0;
    visit_params([&](nn::Param& p) { n += p.value.numel(); });
    return n;
}

diffusion::Denoiser TeacherUNet::as_denoiser() {
    return [this](const Tensor& x, int t) {
        std::vector<int> ts((size_t)x.dim(0), t);
        return forward(x, ts, /*cache=*/false);
    };
}

TrainReport train_teacher(TeacherUNet& model, const std::vector<Tensor>& dataset,
                          const NoiseSchedule& schedule, int steps, int batch_size,
                          float lr, uint64_t seed) {
    if (dataset.empty()) throw DataError("train_teacher: empty dataset");
    const auto& cfg = model.config();
    for (const auto& img : dataset)
        if (img.rank() != 3 || img.dim(0) != cfg.channels ||
            img.dim(1) != cfg.image_resolution || img.dim(2) != cfg.image_resolution)
            throw DataError("train_teacher: dataset image " + img.shape_str() +
                            " does not match teacher resolution");
    if (batch_size < 1) throw ConfigError("train_teacher: batch_size must be >= 1");

    Rng rng(seed);
    optim::Adam opt(model.params(), lr);
    const int R = cfg.image_resolution;
    const size_t img_elems = (size_t)cfg.channels * R * R;

    TrainReport report;
    report.losses.reserve((size_t)steps);
    for (int step = 0; step < steps; ++step) {
        Tensor x_t({batch_size, cfg.channels, R, R});
        Tensor eps({batch_size, cfg.channels, R, R});
        std::vector<int> ts((size_t)batch_size);
        for (int b = 0; b < batch_size; ++b) {
            const auto& x0 = dataset[rng.uniform_index(dataset.size())];
            ts[(size_t)b] = (int)rng.uniform_index((uint64_t)schedule.T);
            Tensor e = rng.normal_tensor(x0.shape());
            Tensor noisy = diffusion::q_sample(x0, ts[(size_t)b], e, schedule);
            std::copy_n(e.data(), img_elems, eps.data() + (size_t)b * img_elems);
            std::copy_n(noisy.data(), img_elems, x_t.data() + (size_t)b * img_elems);
        }

        Tensor pred = model.forward(x_t, ts, /*cache=*/true);
        const float loss = diffusion::simple_loss(eps, pred);
        if (!std::isfinite(loss))
            throw NumericError("train_teacher: non-finite loss at step " +
                               std::to_string(step));
        report.losses.push_back(loss);

        Tensor grad(pred.shape());
        const float scale = 2.0f / (float)pred.numel();
        for (size_t i = 0; i < grad.numel(); ++i)
            grad[i] = scale * (pred[i] - eps[i]);
        model.backward(grad);
        opt.step();
        opt.zero_grad();
    }
    report.steps = steps;
    return report;
}

std::vector<TrajectoryRecord> sample_with_trace_batch(
    TeacherUNet& model, const NoiseSchedule& schedule,
    const std::set<int>& record_steps, diffusion::SampleMode mode, int stride,
    const std::vector<uint64_t>& seeds) {
    const auto steps = diffusion::visited_steps(schedule.T, stride);
    for (int rs : record_steps)
        if (std::find(steps.begin(), steps.end(), rs) == steps.end())
            throw ConfigError("record step " + std::to_string(rs) +
                              " is not visited under stride " + std::to_string(stride));

    const auto& cfg = model.config();
    auto result = diffusion::sample_loop(
        model.as_denoiser(), schedule, stride, mode, seeds,
        {cfg.channels, cfg.image_resolution, cfg.image_resolution},
        std::set<int>(record_steps));

    const size_t img_elems =
        (size_t)cfg.channels * cfg.image_resolution * cfg.image_resolution;
    auto slice = [&](const Tensor& batch, int n) {
        Tensor out({cfg.channels, cfg.image_resolution, cfg.image_resolution});
        std::copy_n(batch.data() + (size_t)n * img_elems, img_elems, out.data());
        return out;
    };

    std::vector<TrajectoryRecord> records;
    records.reserve(seeds.size());
    for (int n = 0; n < (int)seeds.size(); ++n) {
        TrajectoryRecord rec;
        rec.seed = seeds[(size_t)n];
        rec.noise = slice(result.initial, n);
        for (const auto& [t, state] : result.trace) rec.intermediates[t] = slice(state, n);
        rec.final = slice(result.final, n);
        records.push_back(std::move(rec));
    }
    return records;
}

TrajectoryRecord sample_with_trace(TeacherUNet& model, const NoiseSchedule& schedule,
                                   const std::set<int>& record_steps,
                                   diffusion::SampleMode mode, int stride,
                                   uint64_t seed) {
    return sample_with_trace_batch(model, schedule, record_steps, mode, stride,
                                   {seed})[0];
}

namespace {
nlohmann::json config_to_json(const TeacherConfig& c) {
    return {{"image_resolution", c.image_resolution},
            {"channels", c.channels},
            {"base_width", c.base_width},
            {"channel_multipliers", c.channel_multipliers},
            {"time_embedding_dim", c.time_embedding_dim},
            {"T", c.T},
            {"beta_start", c.beta_start},
            {"beta_end", c.beta_end}};
}

TeacherConfig config_from_json(const nlohmann::json& j) {
    TeacherConfig c;
    c.image_resolution = j.at("image_resolution").get<int>();
    c.channels = j.at("channels").get<int>();
    c.base_width = j.at("base_width").get<int>();
    c.channel_multipliers = j.at("channel_multipliers").get<std::vector<int>>();
    c.time_embedding_dim = j.at("time_embedding_dim").get<int>();
    c.T = j.at("T").get<int>();
    c.beta_start = j.at("beta_start").get<double>();
    c.beta_end = j.at("beta_end").get<double>();
    return c;
}
}  // namespace

void save_teacher(const std::filesystem::path& path, TeacherUNet& model,
                  int training_step) {
    nlohmann::json manifest;
    manifest["kind"] = "teacher";
    manifest["schema_version"] = 1;
    manifest["config"] = config_to_json(model.config());
    manifest["training_step"] = training_step;
    manifest["schedule_hash"] = diffusion::schedule_hash(model.config().schedule());

    std::vector<std::pair<std::string, const Tensor*>> blobs;
    model.visit_state([&](const std::string& name, Tensor& t) {
        blobs.emplace_back(name, &t);
    });
    io::write_archive(path, manifest, blobs);
}

TeacherCheckpoint load_teacher(const std::filesystem::path& path) {
    io::Archive ar = io::read_archive(path);
    if (ar.manifest.value("kind", "") != "teacher")
        throw DataError("not a teacher checkpoint: " + path.string());
    TeacherCheckpoint ck;
    ck.config = config_from_json(ar.manifest.at("config"));
    ck.training_step = ar.manifest.value("training_step", 0);
    ck.schedule_hash = ar.manifest.value("schedule_hash", "");
    const std::string recomputed = diffusion::schedule_hash(ck.config.schedule());
    if (recomputed != ck.schedule_hash)
        throw DataError("teacher checkpoint schedule hash mismatch (config encodes " +
                        recomputed + ", manifest says " + ck.schedule_hash + ")");

    ck.model = std::make_unique<TeacherUNet>(ck.config, /*init_seed=*/0);
    size_t consumed = 0;
    ck.model->visit_state([&](const std::string& name, Tensor& t) {
        const Tensor* src = ar.find(name);
        if (!src) throw DataError("checkpoint missing blob: " + name);
        if (!src->same_shape(t))
            throw DataError("checkpoint blob shape mismatch: " + name);
        t = *src;
        ++consumed;
    });
    if (consumed != ar.blobs.size())
        throw DataError("checkpoint has unexpected extra blobs");
    return ck;
}

}  // namespace advkd::teacher
