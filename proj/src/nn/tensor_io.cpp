#include "imls/nn/tensor_io.hpp"

#include "imls/errors.hpp"

namespace imls {

torch::Tensor to_tensor(const Image& img) {
    auto hwc = torch::from_blob(const_cast<float*>(img.data.data()), {img.height, img.width, img.channels},
                                torch::kFloat32);
    return hwc.permute({2, 0, 1}).contiguous();
}

torch::Tensor stack_images(const std::vector<const Image*>& imgs) {
    if (imgs.empty()) throw ShapeError("stack_images: empty batch");
    std::vector<torch::Tensor> ts;
    ts.reserve(imgs.size());
    for (const Image* im : imgs) {
        if (!im->same_shape(*imgs.front())) throw ShapeError("stack_images: images differ in shape");
        ts.push_back(to_tensor(*im));
    }
    return torch::stack(ts);
}

torch::Tensor stack_images(const std::vector<Image>& imgs) {
    std::vector<const Image*> ptrs;
    ptrs.reserve(imgs.size());
    for (const auto& im : imgs) ptrs.push_back(&im);
    return stack_images(ptrs);
}

Image to_image(const torch::Tensor& t) {
    auto chw = t.dim() == 4 ? t.squeeze(0) : t;
    if (chw.dim() != 3) throw ShapeError("to_image: expected a CHW tensor");
    auto hwc = chw.detach().to(torch::kCPU, torch::kFloat32).permute({1, 2, 0}).contiguous();
    Image img(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), static_cast<int>(hwc.size(2)));
    std::memcpy(img.data.data(), hwc.data_ptr<float>(), img.data.size() * sizeof(float));
    return img;
}

torch::Tensor grid_to_tensor(const BoolGrid& g) {
    auto t = torch::empty({1, g.size, g.size}, torch::kFloat32);
    float* p = t.data_ptr<float>();
    for (std::size_t k = 0; k < g.cells.size(); ++k) p[k] = g.cells[k] ? 1.0f : 0.0f;
    return t;
}

BoolGrid tensor_to_grid(const torch::Tensor& t, float threshold) {
    auto flat = t.detach().to(torch::kCPU, torch::kFloat32).squeeze();
    if (flat.dim() != 2 || flat.size(0) != flat.size(1)) throw ShapeError("tensor_to_grid: expected a square grid");
    flat = flat.contiguous();
    BoolGrid g(static_cast<int>(flat.size(0)));
    const float* p = flat.data_ptr<float>();
    for (std::size_t k = 0; k < g.cells.size(); ++k) g.cells[k] = p[k] > threshold;
    return g;
}

}  // namespace imls
