// Architecture tables for SD-DCGAN and SD-BEGAN, written out row by row.
// Resolution 64 is the published layout. Resolution 32 removes one stage:
// the generator's last intermediate upsampling block and the discriminator
// encoder's first downsampling block, adjusting only the adjacent layer's
// input channel count.

#include <stdexcept>

#include "sdgan/nets.hpp"

namespace sdgan {

namespace {

using S = std::vector<std::int64_t>;

LayerRow row(std::string op, S in, S kernel, S out) {
  return {std::move(op), std::move(in), std::move(kernel), std::move(out)};
}

LayerRow same(std::string op, const S& shape) { return row(std::move(op), shape, {}, shape); }

void require_reference_latent(const ModelConfig& c) {
  c.validate();
  if (c.total_dim != 100) throw std::invalid_argument("reference tables assume a 100-dimensional latent space");
}

LayerTable dcgan_generator(std::int64_t k, int res) {
  LayerTable t{
      same("z", {k, 100}),
      row("fc1", {k, 100}, {100, 8192}, {k, 8192}),
      row("reshape", {k, 8192}, {}, {k, 4, 4, 512}),
      same("bnorm", {k, 4, 4, 512}),
      same("relu", {k, 4, 4, 512}),
      row("upconv1", {k, 4, 4, 512}, {5, 5, 512, 256}, {k, 8, 8, 256}),
      same("bnorm", {k, 8, 8, 256}),
      same("relu", {k, 8, 8, 256}),
      row("upconv2", {k, 8, 8, 256}, {5, 5, 256, 128}, {k, 16, 16, 128}),
      same("bnorm", {k, 16, 16, 128}),
      same("relu", {k, 16, 16, 128}),
  };
  if (res == 64) {
    t.push_back(row("upconv3", {k, 16, 16, 128}, {5, 5, 128, 64}, {k, 32, 32, 64}));
    t.push_back(same("bnorm", {k, 32, 32, 64}));
    t.push_back(same("relu", {k, 32, 32, 64}));
    t.push_back(row("upconv4", {k, 32, 32, 64}, {5, 5, 64, 3}, {k, 64, 64, 3}));
    t.push_back(same("tanh", {k, 64, 64, 3}));
  } else {
    t.push_back(row("upconv4", {k, 16, 16, 128}, {5, 5, 128, 3}, {k, 32, 32, 3}));
    t.push_back(same("tanh", {k, 32, 32, 3}));
  }
  return t;
}

LayerTable dcgan_discriminator(std::int64_t k, int res, bool stacked, bool sigmoid) {
  // Stacked channels: 3k input channels, k = 1 everywhere else.
  const std::int64_t in_ch = stacked ? 3 * k : 3;
  const std::int64_t kk = stacked ? 1 : k;
  LayerTable t;
  t.push_back(same("x", {kk, res, res, in_ch}));
  if (res == 64) {
    t.push_back(row("downconv1", {kk, 64, 64, in_ch}, {5, 5, in_ch, 64}, {kk, 32, 32, 64}));
    t.push_back(same("lrelu", {kk, 32, 32, 64}));
    t.push_back(row("downconv2", {kk, 32, 32, 64}, {5, 5, 64, 128}, {kk, 16, 16, 128}));
  } else {
    t.push_back(row("downconv2", {kk, 32, 32, in_ch}, {5, 5, in_ch, 128}, {kk, 16, 16, 128}));
  }
  LayerTable tail{
      same("bnorm", {kk, 16, 16, 128}),
      same("lrelu", {kk, 16, 16, 128}),
      row("downconv3", {kk, 16, 16, 128}, {5, 5, 128, 256}, {kk, 8, 8, 256}),
      same("bnorm", {kk, 8, 8, 256}),
      same("lrelu", {kk, 8, 8, 256}),
      row("downconv4", {kk, 8, 8, 256}, {5, 5, 256, 512}, {kk, 4, 4, 512}),
      row("stackchannels", {kk, 4, 4, 512}, {}, {4, 4, 512 * kk}),
      row("downconv5", {4, 4, 512 * kk}, {3, 3, 512 * kk, 512}, {2, 2, 512}),
      row("flatten", {2, 2, 512}, {}, {2048}),
      row("fc1", {2048}, {2048, 1}, {1}),
  };
  t.insert(t.end(), tail.begin(), tail.end());
  if (sigmoid) t.push_back(same("sigmoid", {1}));
  return t;
}

void began_conv_pair(LayerTable& t, std::int64_t k, std::int64_t hw, std::int64_t ch) {
  for (int i = 0; i < 2; ++i) {
    t.push_back(row("conv2d", {k, hw, hw, ch}, {3, 3, ch, ch}, {k, hw, hw, ch}));
    t.push_back(same("elu", {k, hw, hw, ch}));
  }
}

LayerTable began_generator(std::int64_t k, int res) {
  LayerTable t{
      same("z", {k, 100}),
      row("fc1", {k, 100}, {100, 8192}, {k, 8192}),
      row("reshape", {k, 8192}, {}, {k, 8, 8, 128}),
  };
  for (std::int64_t hw = 8; hw <= res; hw *= 2) {
    began_conv_pair(t, k, hw, 128);
    if (hw < res) t.push_back(row("upsample2", {k, hw, hw, 128}, {}, {k, 2 * hw, 2 * hw, 128}));
  }
  t.push_back(row("conv2d", {k, res, res, 128}, {3, 3, 128, 3}, {k, res, res, 3}));
  return t;
}

LayerTable began_discriminator(std::int64_t k, int res, std::int64_t d_i) {
  const std::int64_t b = d_i + (100 - d_i) * k;
  LayerTable t{
      same("x", {k, res, res, 3}),
      row("conv2d", {k, res, res, 3}, {3, 3, 3, 128}, {k, res, res, 128}),
      same("elu", {k, res, res, 128}),
  };
  began_conv_pair(t, k, res, 128);
  if (res == 64) {
    t.push_back(row("downconv2d", {k, 64, 64, 128}, {3, 3, 128, 256}, {k, 32, 32, 256}));
    t.push_back(same("elu", {k, 32, 32, 256}));
    began_conv_pair(t, k, 32, 256);
    t.push_back(row("downconv2d", {k, 32, 32, 256}, {3, 3, 256, 384}, {k, 16, 16, 384}));
  } else {
    t.push_back(row("downconv2d", {k, 32, 32, 128}, {3, 3, 128, 384}, {k, 16, 16, 384}));
  }
  t.push_back(same("elu", {k, 16, 16, 384}));
  began_conv_pair(t, k, 16, 384);
  t.push_back(row("downconv2d", {k, 16, 16, 384}, {3, 3, 384, 512}, {k, 8, 8, 512}));
  t.push_back(same("elu", {k, 8, 8, 512}));
  began_conv_pair(t, k, 8, 512);
  LayerTable tail{
      row("flatten", {k, 8, 8, 512}, {}, {k, 32768}),
      row("fc1", {k, 32768}, {32768, 100}, {k, 100}),
      row("concat", {k, 100}, {}, {100 * k}),
      row("fc2", {100 * k}, {100 * k, b}, {b}),
      row("fc3", {b}, {b, 100 * k}, {100 * k}),
      row("split", {100 * k}, {}, {k, 100}),
      row("G", {k, 100}, {}, {k, res, res, 3}),
  };
  t.insert(t.end(), tail.begin(), tail.end());
  return t;
}

}  // namespace

LayerTable reference_generator_table(const ModelConfig& c) {
  require_reference_latent(c);
  switch (c.family) {
    case Family::sd_dcgan: return dcgan_generator(c.k, c.resolution);
    case Family::sd_began: return began_generator(c.k, c.resolution);
    case Family::ac_dcgan: break;
  }
  throw std::invalid_argument("no reference table for family " + to_string(c.family));
}

LayerTable reference_discriminator_table(const ModelConfig& c) {
  require_reference_latent(c);
  switch (c.family) {
    case Family::sd_dcgan:
      return dcgan_discriminator(c.k, c.resolution, c.siamese_mode == SiameseMode::stacked_channels,
                                 c.loss != LossKind::wgan);
    case Family::sd_began: return began_discriminator(c.k, c.resolution, c.identity_dim);
    case Family::ac_dcgan: break;
  }
  throw std::invalid_argument("no reference table for family " + to_string(c.family));
}

}  // namespace sdgan
