// Renders a smooth texture, checks the network's scale and rotation
// covariance on it and prints a short summary of its descriptor.

#include <iostream>

#include "qqnet/qqnet.hpp"

int main() {
    using namespace qqnet;
    NetConfig cfg;
    cfg.num_layers = 3;
    cfg.s0_list = {1.0, 4.0};

    // band-limited sum of plane waves, shortest wavelength 10 px
    const Image img = make_smooth_texture(160, 10.0, 42);

    const CovarianceReport scale = check_scale_covariance(img, cfg, 2.0, 1.0);
    std::cout << "scale factor 2, config " << scale.config_hash << "\n";
    for (const LayerMetric& l : scale.layers)
        std::cout << "  layer " << l.layer << ": relative rms " << l.rel_rms << "\n";

    const CovarianceReport rot = check_rotation_covariance(img, cfg, 1, 1.0);
    for (const LayerMetric& l : rot.layers)
        std::cout << "  quarter turn, layer " << l.layer << ": max abs " << l.max_abs << "\n";

    const Descriptor d = assemble_descriptor(img, cfg, ChannelMode::grey);
    std::cout << "descriptor length " << d.size() << ", first Q mean " << d.values[kStatCount - 1] << "\n";
    return scale.passed && rot.passed ? 0 : 1;
}
