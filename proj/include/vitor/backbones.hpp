#pragma once

// Parameter tables of the frozen convolutional backbones the visual
// extractor stands in for. Only used for parameter accounting; there is no
// convolutional forward pass in this library.

#include <array>
#include <cstddef>
#include <vector>

#include "vitor/neuralnet.hpp"

namespace vitor::backbones {

using nn::LayerKind;
using nn::ParamRow;

// VGG-16 convolutional part: 13 biased 3x3 convolutions.
inline std::vector<ParamRow> vgg16_conv_table() {
  constexpr std::array<std::size_t, 14> channels = {3, 64, 64, 128, 128, 256, 256, 256, 512, 512, 512, 512, 512, 512};
  std::vector<ParamRow> rows;
  for (std::size_t i = 0; i + 1 < channels.size(); ++i)
    rows.push_back({LayerKind::conv, 3, channels[i], channels[i + 1], true});
  return rows;
}

// ResNet-152 convolutional part (everything before the classifier):
// bias-free convolutions each followed by batch normalization, bottleneck
// blocks of 3, 8, 36 and 3 with expansion 4.
inline std::vector<ParamRow> resnet152_conv_table() {
  std::vector<ParamRow> rows;
  auto conv_bn = [&](std::size_t k, std::size_t in, std::size_t out) {
    rows.push_back({LayerKind::conv, k, in, out, false});
    rows.push_back({LayerKind::batchnorm, 1, out, out, false});
  };
  conv_bn(7, 3, 64);
  constexpr std::array<std::size_t, 4> blocks = {3, 8, 36, 3};
  constexpr std::array<std::size_t, 4> widths = {64, 128, 256, 512};
  constexpr std::size_t expansion = 4;
  std::size_t in = 64;
  for (std::size_t s = 0; s < blocks.size(); ++s) {
    const std::size_t w = widths[s];
    for (std::size_t b = 0; b < blocks[s]; ++b) {
      conv_bn(1, in, w);
      conv_bn(3, w, w);
      conv_bn(1, w, w * expansion);
      if (b == 0) conv_bn(1, in, w * expansion);  // projection shortcut
      in = w * expansion;
    }
  }
  return rows;
}

inline constexpr std::size_t kVgg16FeatureDim = 512 * 7 * 7;  // 25088
inline constexpr std::size_t kResnet152FeatureDim = 2048;

}  // namespace vitor::backbones
