#include "glucolens/image.hpp"

namespace glucolens {

Image augment_random(const Image& img, const AugmentRanges& ranges, std::uint64_t seed)
{
    Rng rng(seed);
    const double gain = rng.uniform(ranges.gain_min, ranges.gain_max);
    const double angle = rng.uniform(ranges.angle_min_deg, ranges.angle_max_deg);
    const double sigma = rng.uniform(ranges.sigma_min, ranges.sigma_max);
    const std::uint64_t noise_seed = rng.next_u64();
    return aug_noise(aug_rotate(aug_contrast(img, gain), angle), sigma, noise_seed);
}

} // namespace glucolens
