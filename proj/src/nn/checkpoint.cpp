#include <cstring>
#include <fstream>

#include "json.hpp"

#include "dqp/nn/network.hpp"

namespace dqp::nn {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'D', 'Q', 'P', 'N', 'E', 'T', '0', '1'};

json arch_json(const ArchSpec& a) {
  json convs = json::array();
  for (const ConvSpec& c : a.convs) convs.push_back({{"filters", c.filters}, {"kernel", c.kernel}, {"stride", c.stride}});
  json j = {{"input", {a.height, a.width, a.channels}},
            {"convs", convs},
            {"hidden", a.hidden},
            {"side", a.side},
            {"bn_momentum", a.bn_momentum},
            {"bn_eps", a.bn_eps}};
  // Written only when set, so unscaled checkpoints keep their old bytes.
  if (a.output_scale != 1.0) j["output_scale"] = a.output_scale;
  return j;
}

ArchSpec arch_from_json(const json& j) {
  ArchSpec a;
  const auto input = j.at("input").get<std::vector<int>>();
  if (input.size() != 3) throw ShapeError("checkpoint input shape must have three dimensions");
  a.height = input[0];
  a.width = input[1];
  a.channels = input[2];
  for (const json& c : j.at("convs")) {
    a.convs.push_back({c.at("filters").get<int>(), c.at("kernel").get<int>(), c.at("stride").get<int>()});
  }
  a.hidden = j.at("hidden").get<std::vector<int>>();
  a.side = j.at("side").get<int>();
  a.bn_momentum = j.at("bn_momentum").get<double>();
  a.bn_eps = j.at("bn_eps").get<double>();
  a.output_scale = j.value("output_scale", 1.0);
  return a;
}

void write_block(std::ostream& out, const Matrix& m) {
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

void read_block(std::istream& in, Matrix& m) {
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint truncated");
}

}  // namespace

void save_checkpoint(std::ostream& out, const Network& net, const Adam* adam, const std::string& metadata_json) {
  json chain = json::array();
  for (const LayerSpec& l : net.chain_) chain.push_back(describe(l));
  json header = {{"format", 1},
                 {"arch", arch_json(net.arch_)},
                 {"chain", chain},
                 {"seed", net.seed_},
                 {"metadata", json::parse(metadata_json)}};
  if (adam) {
    header["adam"] = {{"lr", adam->lr},
                      {"beta1", adam->beta1},
                      {"beta2", adam->beta2},
                      {"eps", adam->eps},
                      {"steps", adam->steps},
                      {"moments", !adam->m.empty()}};
  } else {
    header["adam"] = nullptr;
  }
  const std::string text = header.dump();
  const std::uint64_t len = text.size();
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Matrix* m : net.parameters()) write_block(out, *m);
  for (const Matrix* m : net.buffers()) write_block(out, *m);
  if (adam && !adam->m.empty()) {
    for (const Matrix& m : adam->m) write_block(out, m);
    for (const Matrix& v : adam->v) write_block(out, v);
  }
  if (!out) throw std::runtime_error("failed to write checkpoint");
}

Network load_checkpoint(std::istream& in, Adam* adam, std::string* metadata_json) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw std::runtime_error("not a network checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1U << 26)) throw std::runtime_error("corrupt checkpoint header");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint truncated");
  const json header = json::parse(text);
  if (header.at("format").get<int>() != 1) throw std::runtime_error("unsupported checkpoint format");

  Network net(arch_from_json(header.at("arch")), header.at("seed").get<std::uint64_t>());
  for (Matrix* m : net.parameters()) read_block(in, *m);
  for (Matrix* m : net.buffers()) read_block(in, *m);
  net.touch();
  const json& a = header.at("adam");
  if (adam) {
    *adam = Adam{};
    if (!a.is_null()) {
      adam->lr = a.at("lr").get<double>();
      adam->beta1 = a.at("beta1").get<double>();
      adam->beta2 = a.at("beta2").get<double>();
      adam->eps = a.at("eps").get<double>();
      adam->steps = a.at("steps").get<std::int64_t>();
      if (a.at("moments").get<bool>()) {
        for (const Matrix* p : net.parameters()) {
          adam->m.push_back(Matrix::Zero(p->rows(), p->cols()));
          adam->v.push_back(Matrix::Zero(p->rows(), p->cols()));
        }
        for (Matrix& m : adam->m) read_block(in, m);
        for (Matrix& v : adam->v) read_block(in, v);
      }
    }
  }
  if (metadata_json) *metadata_json = header.at("metadata").dump();
  return net;
}

void save_checkpoint_file(const std::string& path, const Network& net, const Adam* adam,
                          const std::string& metadata_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save_checkpoint(out, net, adam, metadata_json);
}

Network load_checkpoint_file(const std::string& path, Adam* adam, std::string* metadata_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_checkpoint(in, adam, metadata_json);
}

}  // namespace dqp::nn
