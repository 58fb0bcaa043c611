#include "zeroscatter/tensor.hpp"

#include <sstream>

namespace zs {

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
    return os.str();
}

Tensor stack_batch(const std::vector<const Tensor*>& items) {
    if (items.empty()) fail_data("stack_batch: empty batch");
    const Tensor& first = *items[0];
    if (first.n != 1) fail_data("stack_batch: items must have n=1, got " + first.shape_str());
    Tensor out(static_cast<int>(items.size()), first.c, first.h, first.w);
    int64_t stride = first.size();
    for (size_t i = 0; i < items.size(); ++i) {
        const Tensor& t = *items[i];
        if (!t.same_shape(first))
            fail_data("stack_batch: item " + std::to_string(i) + " has shape " + t.shape_str() +
                      ", expected " + first.shape_str());
        std::copy(t.v.begin(), t.v.end(), out.v.begin() + static_cast<int64_t>(i) * stride);
    }
    return out;
}

}  // namespace zs
