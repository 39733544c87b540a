#include "bbnas/nas/primitives.hpp"

#include <cmath>

#include "bbnas/autodiff/ops.hpp"
#include "bbnas/common/error.hpp"

namespace bbnas::nas {

Parameter& ParamFactory::conv(const std::string& name, Role role, std::size_t out,
                              std::size_t in, std::size_t k) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(in * k * k));
    return normal(name, role, ad::Shape{out, in, k, k}, stddev);
}

Parameter& ParamFactory::normal(const std::string& name, Role role, ad::Shape shape,
                                double stddev) {
    std::vector<double> v(ad::numel(shape));
    for (auto& x : v) x = stddev * rng_.normal();
    return store_.add(name, role, Tensor::from(std::move(shape), std::move(v), true));
}

Parameter& ParamFactory::zeros(const std::string& name, Role role, ad::Shape shape) {
    return store_.add(name, role, Tensor::zeros(std::move(shape), true));
}

namespace {

constexpr std::string_view kKnown[] = {"zero",       "skip",       "conv3x3-relu",
                                       "maxpool3x3", "avgpool3x3", "sepconv3x3",
                                       "sepconv5x5", "dilconv3x3", "dilconv5x5"};

class Zero final : public Primitive {
public:
    explicit Zero(std::size_t stride) : stride_(stride) {}
    std::string_view name() const override { return "zero"; }
    Tensor forward(const Tensor& x) const override {
        const auto h = ad::conv_out_extent(x.dim(2), 1, stride_, 0);
        const auto w = ad::conv_out_extent(x.dim(3), 1, stride_, 0);
        return Tensor::zeros({x.dim(0), x.dim(1), h, w});
    }

private:
    std::size_t stride_;
};

// Identity at stride 1; strided 1x1 convolution otherwise.
class Skip final : public Primitive {
public:
    Skip(std::size_t c, std::size_t stride, ParamFactory& f, const std::string& prefix, Role role)
        : stride_(stride) {
        if (stride_ != 1) proj_ = &f.conv(prefix + ".proj", role, c, c, 1);
    }
    std::string_view name() const override { return "skip"; }
    Tensor forward(const Tensor& x) const override {
        if (!proj_) return x;
        ad::Conv2dOptions o;
        o.stride = stride_;
        return ad::conv2d(x, proj_->value(), std::nullopt, o);
    }

private:
    std::size_t stride_;
    Parameter* proj_ = nullptr;
};

class ReluConv final : public Primitive {
public:
    ReluConv(std::size_t c, std::size_t stride, ParamFactory& f, const std::string& prefix,
             Role role)
        : stride_(stride), w_(&f.conv(prefix + ".w", role, c, c, 3)) {}
    std::string_view name() const override { return "conv3x3-relu"; }
    Tensor forward(const Tensor& x) const override {
        ad::Conv2dOptions o;
        o.stride = stride_;
        o.padding = 1;
        return ad::conv2d(ad::relu(x), w_->value(), std::nullopt, o);
    }

private:
    std::size_t stride_;
    Parameter* w_;
};

class Pool final : public Primitive {
public:
    Pool(bool is_max, std::size_t stride) : max_(is_max), stride_(stride) {}
    std::string_view name() const override { return max_ ? "maxpool3x3" : "avgpool3x3"; }
    Tensor forward(const Tensor& x) const override {
        return max_ ? ad::max_pool(x, 3, stride_, 1) : ad::avg_pool(x, 3, stride_, 1);
    }

private:
    bool max_;
    std::size_t stride_;
};

// relu -> depthwise kxk (dilated) -> pointwise 1x1
struct DepthwiseSeparable {
    Parameter* depthwise;
    Parameter* pointwise;
    ad::Conv2dOptions opts;

    Tensor forward(const Tensor& x) const {
        Tensor y = ad::conv2d(ad::relu(x), depthwise->value(), std::nullopt, opts);
        return ad::conv2d(y, pointwise->value(), std::nullopt, {});
    }
};

DepthwiseSeparable make_dws(std::size_t c, std::size_t k, std::size_t stride,
                            std::size_t dilation, ParamFactory& f, const std::string& prefix,
                            Role role) {
    DepthwiseSeparable d;
    d.depthwise = &f.conv(prefix + ".dw", role, c, 1, k);
    d.pointwise = &f.conv(prefix + ".pw", role, c, c, 1);
    d.opts.stride = stride;
    d.opts.dilation = dilation;
    d.opts.padding = dilation * (k - 1) / 2;
    d.opts.groups = c;
    return d;
}

class SepConv final : public Primitive {
public:
    SepConv(std::size_t c, std::size_t k, std::size_t stride, ParamFactory& f,
            const std::string& prefix, Role role)
        : name_(k == 3 ? "sepconv3x3" : "sepconv5x5"),
          first_(make_dws(c, k, stride, 1, f, prefix + ".a", role)),
          second_(make_dws(c, k, 1, 1, f, prefix + ".b", role)) {}
    std::string_view name() const override { return name_; }
    Tensor forward(const Tensor& x) const override { return second_.forward(first_.forward(x)); }

private:
    std::string name_;
    DepthwiseSeparable first_, second_;
};

class DilConv final : public Primitive {
public:
    DilConv(std::size_t c, std::size_t k, std::size_t stride, ParamFactory& f,
            const std::string& prefix, Role role)
        : name_(k == 3 ? "dilconv3x3" : "dilconv5x5"),
          body_(make_dws(c, k, stride, 2, f, prefix, role)) {}
    std::string_view name() const override { return name_; }
    Tensor forward(const Tensor& x) const override { return body_.forward(x); }

private:
    std::string name_;
    DepthwiseSeparable body_;
};

}  // namespace

OpSet::OpSet(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        require(is_known_primitive(names_[i]), ErrorKind::invalid_argument,
                "op set: unknown primitive '" + names_[i] + "'");
        for (std::size_t j = 0; j < i; ++j)
            require(names_[j] != names_[i], ErrorKind::invalid_argument,
                    "op set: duplicate primitive '" + names_[i] + "'");
    }
    require(contains("zero") && contains("skip"), ErrorKind::invalid_argument,
            "op set: must contain 'zero' and 'skip'");
}

OpSet OpSet::desk() { return OpSet({"zero", "skip", "conv3x3-relu", "maxpool3x3"}); }

OpSet OpSet::full() {
    return OpSet({"zero", "skip", "maxpool3x3", "avgpool3x3", "sepconv3x3", "sepconv5x5",
                  "dilconv3x3", "dilconv5x5"});
}

OpSet OpSet::by_name(std::string_view which) {
    if (which == "desk") return desk();
    if (which == "full") return full();
    fail(ErrorKind::invalid_argument, "unknown op set '" + std::string(which) + "'");
}

std::size_t OpSet::index_of(std::string_view op) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == op) return i;
    fail(ErrorKind::invalid_argument, "op set: no primitive '" + std::string(op) + "'");
}

bool OpSet::contains(std::string_view op) const {
    for (const auto& n : names_)
        if (n == op) return true;
    return false;
}

bool is_known_primitive(std::string_view name) {
    for (auto k : kKnown)
        if (k == name) return true;
    return false;
}

PrimitivePtr make_primitive(std::string_view name, std::size_t channels, std::size_t stride,
                            ParamFactory& f, const std::string& prefix, Role role) {
    if (name == "zero") return std::make_unique<Zero>(stride);
    if (name == "skip") return std::make_unique<Skip>(channels, stride, f, prefix, role);
    if (name == "conv3x3-relu") return std::make_unique<ReluConv>(channels, stride, f, prefix, role);
    if (name == "maxpool3x3") return std::make_unique<Pool>(true, stride);
    if (name == "avgpool3x3") return std::make_unique<Pool>(false, stride);
    if (name == "sepconv3x3") return std::make_unique<SepConv>(channels, 3, stride, f, prefix, role);
    if (name == "sepconv5x5") return std::make_unique<SepConv>(channels, 5, stride, f, prefix, role);
    if (name == "dilconv3x3") return std::make_unique<DilConv>(channels, 3, stride, f, prefix, role);
    if (name == "dilconv5x5") return std::make_unique<DilConv>(channels, 5, stride, f, prefix, role);
    fail(ErrorKind::invalid_argument, "unknown primitive '" + std::string(name) + "'");
}

Tensor mixed_op_forward(const Tensor& x, const Tensor& alpha_edge,
                        std::span<const PrimitivePtr> ops) {
    require(alpha_edge.rank() == 1 && alpha_edge.dim(0) == ops.size(),
            ErrorKind::shape_mismatch,
            "mixed_op: alpha " + ad::to_string(alpha_edge.shape()) + " for " +
                std::to_string(ops.size()) + " primitives");
    std::vector<Tensor> outs;
    outs.reserve(ops.size());
    for (const auto& op : ops) outs.push_back(op->forward(x));
    for (std::size_t i = 1; i < outs.size(); ++i)
        require(outs[i].shape() == outs[0].shape(), ErrorKind::shape_mismatch,
                "mixed_op: primitive '" + std::string(ops[i]->name()) + "' produced " +
                    ad::to_string(outs[i].shape()) + ", expected " +
                    ad::to_string(outs[0].shape()));
    return ad::weighted_sum(outs, ad::softmax(alpha_edge, 0));
}

}  // namespace bbnas::nas
