#pragma once

#include "duskforge/params.hpp"

#include <string>
#include <vector>

namespace duskforge {

template <typename T>
struct Conv2dLayer {
    PTensor<T> w; // [Cout, Cin, k, k]
    PTensor<T> b; // [Cout]
    int stride = 1;
    int pad = 1;

    void init(const std::string& name, int cin, int cout, int k, Rng& rng, int stride_ = 1,
              int pad_ = -1) {
        stride = stride_;
        pad = pad_ < 0 ? k / 2 : pad_;
        w.name = name + "/w";
        w.value = Tensor<T>::zeros({cout, cin, k, k});
        init_he_normal(w.value, cin * k * k, rng);
        b.name = name + "/b";
        b.value = Tensor<T>::zeros({cout});
    }

    Var<T> apply(Binder<T>& bind, const Var<T>& x) {
        return conv2d(x, bind(w), bind(b), stride, pad);
    }

    void collect(std::vector<PTensor<T>*>& out) {
        out.push_back(&w);
        out.push_back(&b);
    }
};

template <typename T>
struct LinearLayer {
    PTensor<T> w; // [in, out]
    PTensor<T> b; // [out]

    void init(const std::string& name, int in, int out, Rng& rng) {
        w.name = name + "/w";
        w.value = Tensor<T>::zeros({in, out});
        init_uniform_fanin(w.value, in, rng);
        b.name = name + "/b";
        b.value = Tensor<T>::zeros({out});
    }

    Var<T> apply(Binder<T>& bind, const Var<T>& x) {
        return add(matmul(x, bind(w)), bind(b));
    }

    void collect(std::vector<PTensor<T>*>& out) {
        out.push_back(&w);
        out.push_back(&b);
    }
};

// Group normalization with group size 1: per-sample, per-channel spatial
// statistics. No running averages, so train and eval behave identically.
template <typename T>
struct ChannelNorm {
    PTensor<T> gamma; // [C]
    PTensor<T> beta;  // [C]
    double eps = 1e-5;

    void init(const std::string& name, int channels) {
        gamma.name = name + "/gamma";
        gamma.value = Tensor<T>::full({channels}, T(1));
        beta.name = name + "/beta";
        beta.value = Tensor<T>::zeros({channels});
    }

    Var<T> apply(Binder<T>& bind, const Var<T>& x) {
        const int c = gamma.value.size(0);
        auto mu = mean_axis(mean_axis(x, 3, true), 2, true); // [N,C,1,1]
        auto centered = sub(x, mu);
        auto var = mean_axis(mean_axis(mul(centered, centered), 3, true), 2, true);
        auto inv = pow_scalar(add_scalar(var, eps), -0.5);
        auto unit = mul(centered, inv);
        auto g = reshape(bind(gamma), {1, c, 1, 1});
        auto s = reshape(bind(beta), {1, c, 1, 1});
        return add(mul(unit, g), s);
    }

    void collect(std::vector<PTensor<T>*>& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }
};

// Desk-scale feature extractor: three conv stages, each conv-norm-ReLU x2
// followed by 2x average pooling, then global average pooling to a fixed-
// width feature vector.
template <typename T>
struct FeatureExtractor {
    std::vector<Conv2dLayer<T>> convs;
    std::vector<ChannelNorm<T>> norms;
    std::vector<int> stage_widths = {16, 32, 64};
    int input_channels = 3;
    int feature_dim = 64;

    void init(const std::string& name, int in_channels, const std::vector<int>& widths, Rng& rng) {
        input_channels = in_channels;
        stage_widths = widths;
        feature_dim = widths.back();
        convs.clear();
        norms.clear();
        int cin = in_channels;
        for (size_t s = 0; s < widths.size(); ++s) {
            for (int j = 0; j < 2; ++j) {
                const std::string base =
                    name + "/stage" + std::to_string(s) + "/conv" + std::to_string(j);
                Conv2dLayer<T> conv;
                conv.init(base, cin, widths[s], 3, rng);
                convs.push_back(std::move(conv));
                ChannelNorm<T> norm;
                norm.init(base + "/norm", widths[s]);
                norms.push_back(std::move(norm));
                cin = widths[s];
            }
        }
    }

    // [N,C,H,W] -> [N, feature_dim]
    Var<T> features(Binder<T>& bind, const Var<T>& image) {
        Var<T> x = image;
        size_t li = 0;
        for (size_t s = 0; s < stage_widths.size(); ++s) {
            for (int j = 0; j < 2; ++j, ++li)
                x = relu(norms[li].apply(bind, convs[li].apply(bind, x)));
            x = avgpool2d(x, 2);
        }
        return mean_axis(mean_axis(x, 3), 2); // [N, d]
    }

    void collect(std::vector<PTensor<T>*>& out) {
        for (size_t i = 0; i < convs.size(); ++i) {
            convs[i].collect(out);
            norms[i].collect(out);
        }
    }
};

// Single-hidden-layer MLP used for the projection and prediction heads.
template <typename T>
struct MlpHead {
    LinearLayer<T> l1, l2;

    void init(const std::string& name, int in, int hidden, int out, Rng& rng) {
        l1.init(name + "/l1", in, hidden, rng);
        l2.init(name + "/l2", hidden, out, rng);
    }

    Var<T> apply(Binder<T>& bind, const Var<T>& x) {
        return l2.apply(bind, relu(l1.apply(bind, x)));
    }

    void collect(std::vector<PTensor<T>*>& out) {
        l1.collect(out);
        l2.collect(out);
    }
};

struct ModelDims {
    int image_channels = 3;
    std::vector<int> stage_widths = {16, 32, 64};
    int num_classes = 10;
    int head_hidden = 128;
    int head_out = 64;
};

// The downstream model plus everything adaptation needs: classifier head,
// online projection/prediction heads, and the EMA target twin of the
// extractor and projection head. The target branch is bound non-trainable,
// which is what implements stop-gradient.
template <typename T>
struct AdaptationModel {
    FeatureExtractor<T> extractor;
    LinearLayer<T> classifier;
    MlpHead<T> head_q; // online projection
    MlpHead<T> head_z; // online prediction
    FeatureExtractor<T> target_extractor;
    MlpHead<T> target_q;
    T tau = T(0.99);

    void init(const ModelDims& dims, Rng& rng) {
        extractor.init("extractor", dims.image_channels, dims.stage_widths, rng);
        classifier.init("classifier", extractor.feature_dim, dims.num_classes, rng);
        head_q.init("head_q", extractor.feature_dim, dims.head_hidden, dims.head_out, rng);
        head_z.init("head_z", dims.head_out, dims.head_hidden, dims.head_out, rng);
        target_extractor.init("target_extractor", dims.image_channels, dims.stage_widths, rng);
        target_q.init("target_q", extractor.feature_dim, dims.head_hidden, dims.head_out, rng);
        reset_target();
    }

    // Target starts as an exact copy of the online branch.
    void reset_target() {
        auto online = online_ema_params();
        auto target = target_params();
        for (size_t i = 0; i < online.size(); ++i) target[i]->value = online[i]->value;
    }

    // target = tau * target + (1 - tau) * online, exactly.
    void ema_update() {
        auto online = online_ema_params();
        auto target = target_params();
        for (size_t i = 0; i < online.size(); ++i) {
            Tensor<T>& t = target[i]->value;
            const Tensor<T>& o = online[i]->value;
            for (int64_t j = 0; j < t.numel(); ++j) t[j] = tau * t[j] + (T(1) - tau) * o[j];
        }
    }

    Var<T> classify(Binder<T>& bind, const Var<T>& features) {
        return classifier.apply(bind, features);
    }

    // Online pipeline z(q(F(v))) and target pipeline q'(F'(v)).
    Var<T> online_projection(Binder<T>& bind, const Var<T>& image) {
        return head_z.apply(bind, head_q.apply(bind, extractor.features(bind, image)));
    }
    Var<T> target_projection(Binder<T>& bind, const Var<T>& image) {
        return target_q.apply(bind, target_extractor.features(bind, image));
    }

    std::vector<PTensor<T>*> trainable_params() {
        std::vector<PTensor<T>*> out;
        extractor.collect(out);
        classifier.collect(out);
        head_q.collect(out);
        head_z.collect(out);
        return out;
    }
    std::vector<PTensor<T>*> target_params() {
        std::vector<PTensor<T>*> out;
        target_extractor.collect(out);
        target_q.collect(out);
        return out;
    }
    std::vector<PTensor<T>*> all_params() {
        auto out = trainable_params();
        auto t = target_params();
        out.insert(out.end(), t.begin(), t.end());
        return out;
    }

private:
    // Online parameters mirrored by the target twin, in matching order.
    std::vector<PTensor<T>*> online_ema_params() {
        std::vector<PTensor<T>*> out;
        extractor.collect(out);
        head_q.collect(out);
        return out;
    }
};

} // namespace duskforge
