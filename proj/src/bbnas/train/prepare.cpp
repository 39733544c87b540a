#include "bbnas/train/prepare.hpp"

#include "bbnas/common/error.hpp"
#include "bbnas/common/rng.hpp"

namespace bbnas::train {

PreparedData prepare_data(const TrainConfig& cfg) {
    require_valid(cfg);
    const auto src = DataSource::parse(cfg.data_source);
    data::LabeledImageSet raw;
    PreparedData out;
    if (src.synthetic) {
        data::SyntheticSpec s;
        s.classes = src.classes;
        s.per_class = src.per_class;
        s.size = src.size;
        s.channels = src.channels;
        s.noise = cfg.data_noise;
        s.seed = cfg.data_seed;
        raw = data::make_synthetic(s);
        s.per_class = cfg.test_per_class;
        s.seed = derive_seed(cfg.data_seed, 0x7e57);
        out.test = data::make_synthetic(s);
    } else {
        auto splits = data::load_cifar10_dir(src.dir);
        raw = std::move(splits.train);
        out.test = std::move(splits.test);
    }
    out.spec.imbalance_ratio = cfg.imbalance_ratio;
    out.spec.base_count = cfg.base_count;
    out.spec.num_classes = raw.num_classes;
    out.longtail = data::build_longtail(raw, out.spec, derive_seed(cfg.data_seed, 1));
    out.split = data::split_train_val(out.longtail.data, cfg.train_fraction,
                                      derive_seed(cfg.data_seed, 2));
    out.norm = data::compute_normalization(out.longtail.data);
    return out;
}

}  // namespace bbnas::train
