#ifndef GLUCOLENS_TESTS_SUPPORT_HPP
#define GLUCOLENS_TESTS_SUPPORT_HPP

#include <filesystem>
#include <string>

#include <unistd.h>

#include "glucolens/image.hpp"
#include "glucolens/random.hpp"

namespace testing {

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("glucolens_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline glucolens::Image random_image(glucolens::Rng& rng, Eigen::Index w, Eigen::Index h, double lo = 0,
                                     double hi = 1)
{
    glucolens::Image img(h, w);
    for (Eigen::Index i = 0; i < img.size(); ++i)
        img(i) = rng.uniform(lo, hi);
    return img;
}

inline glucolens::QuantizedImage random_codes(glucolens::Rng& rng, Eigen::Index w, Eigen::Index h, int levels)
{
    glucolens::QuantizedImage q{glucolens::CodeArray(h, w), levels};
    for (Eigen::Index i = 0; i < q.codes.size(); ++i)
        q.codes(i) = static_cast<int>(rng.below(static_cast<std::uint64_t>(levels)));
    return q;
}

} // namespace testing

#endif
