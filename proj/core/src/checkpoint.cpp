#include "affect/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace affect::checkpoint {

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    os.write(buf, 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    os.write(buf, 8);
}

std::uint32_t read_u32(std::istream& is) {
    char buf[4];
    is.read(buf, 4);
    if (!is) throw ParseError("checkpoint truncated");
    std::uint32_t v;
    std::memcpy(&v, buf, 4);
    return v;
}

std::uint64_t read_u64(std::istream& is) {
    char buf[8];
    is.read(buf, 8);
    if (!is) throw ParseError("checkpoint truncated");
    std::uint64_t v;
    std::memcpy(&v, buf, 8);
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    const std::uint32_t n = read_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    if (!is) throw ParseError("checkpoint truncated");
    return s;
}

}  // namespace

void write_container(const std::filesystem::path& path, const Container& c) {
    if (c.section.size() != 4)
        throw ParamError("checkpoint section tag must be 4 chars");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ParseError("cannot open " + path.string() + " for writing");
    os.write(kMagic, 4);
    write_u32(os, kFormatVersion);
    os.write(c.section.data(), 4);
    write_string(os, c.text);
    write_u32(os, static_cast<std::uint32_t>(c.blobs.size()));
    for (const Blob& b : c.blobs) {
        write_string(os, b.name);
        write_u32(os, static_cast<std::uint32_t>(b.tensor.rank()));
        for (std::size_t d : b.tensor.shape) write_u64(os, d);
        os.write(reinterpret_cast<const char*>(b.tensor.data.data()),
                 static_cast<std::streamsize>(b.tensor.size() * sizeof(double)));
    }
    if (!os) throw ParseError("write failed for " + path.string());
}

Container read_container(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw ParseError(path.string() + ": bad magic, not an AFPL container");
    const std::uint32_t version = read_u32(is);
    if (version != kFormatVersion)
        throw ParseError(path.string() + ": unsupported format version " +
                         std::to_string(version));
    Container c;
    char section[4];
    is.read(section, 4);
    if (!is) throw ParseError("checkpoint truncated");
    c.section.assign(section, 4);
    c.text = read_string(is);
    const std::uint32_t nblobs = read_u32(is);
    c.blobs.reserve(nblobs);
    for (std::uint32_t i = 0; i < nblobs; ++i) {
        Blob b;
        b.name = read_string(is);
        const std::uint32_t rank = read_u32(is);
        std::vector<std::size_t> shape(rank);
        for (std::uint32_t r = 0; r < rank; ++r)
            shape[r] = static_cast<std::size_t>(read_u64(is));
        std::vector<double> data(shape_product(shape));
        is.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (!is) throw ParseError("checkpoint truncated in blob " + b.name);
        b.tensor = Tensor(std::move(shape), std::move(data));
        c.blobs.push_back(std::move(b));
    }
    return c;
}

void save_model(const std::filesystem::path& path, const nn::NetworkSpec& spec,
                const nn::ModelWeights& weights) {
    Container c;
    c.section = "NNET";
    c.text = nn::spec_to_text(spec);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const nn::LayerWeights& lw = weights.layers[i];
        const std::string& name = spec.layers[i].name;
        if (!lw.has_params()) continue;
        c.blobs.push_back({name + "/weight", lw.weight});
        c.blobs.push_back({name + "/bias", lw.bias});
        if (lw.running_mean.size() > 0) {
            c.blobs.push_back({name + "/running_mean", lw.running_mean});
            c.blobs.push_back({name + "/running_var", lw.running_var});
        }
    }
    Tensor frozen = Tensor::zeros({weights.frozen.size()});
    for (std::size_t i = 0; i < weights.frozen.size(); ++i)
        frozen.data[i] = weights.frozen[i] ? 1.0 : 0.0;
    c.blobs.push_back({"frozen", std::move(frozen)});
    write_container(path, c);
}

std::pair<nn::NetworkSpec, nn::ModelWeights> load_model(
    const std::filesystem::path& path) {
    Container c = read_container(path);
    if (c.section != "NNET")
        throw ParseError(path.string() + ": expected NNET section, got " +
                         c.section);
    nn::NetworkSpec spec = nn::spec_from_text(c.text);
    // reference weights give the expected shapes
    nn::ModelWeights weights = nn::init_weights(spec, 0);
    auto find_blob = [&](const std::string& name) -> const Blob* {
        for (const Blob& b : c.blobs)
            if (b.name == name) return &b;
        return nullptr;
    };
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        nn::LayerWeights& lw = weights.layers[i];
        if (!lw.has_params()) continue;
        const std::string& name = spec.layers[i].name;
        for (auto [suffix, dst] :
             {std::pair<const char*, Tensor*>{"/weight", &lw.weight},
              {"/bias", &lw.bias}}) {
            const Blob* b = find_blob(name + suffix);
            if (!b) throw ParseError(path.string() + ": missing blob " + name +
                                     suffix);
            if (b->tensor.shape != dst->shape)
                throw ParseError(path.string() + ": blob " + name + suffix +
                                 " shape " + shape_to_string(b->tensor.shape) +
                                 " does not match spec shape " +
                                 shape_to_string(dst->shape));
            *dst = b->tensor;
        }
        if (lw.running_mean.size() > 0) {
            for (auto [suffix, dst] : {std::pair<const char*, Tensor*>{
                                           "/running_mean", &lw.running_mean},
                                       {"/running_var", &lw.running_var}}) {
                const Blob* b = find_blob(name + suffix);
                if (!b)
                    throw ParseError(path.string() + ": missing blob " + name +
                                     suffix);
                if (b->tensor.shape != dst->shape)
                    throw ParseError(path.string() + ": blob " + name + suffix +
                                     " shape mismatch");
                *dst = b->tensor;
            }
        }
    }
    if (const Blob* f = find_blob("frozen")) {
        if (f->tensor.size() != weights.frozen.size())
            throw ParseError(path.string() + ": frozen flag count mismatch");
        for (std::size_t i = 0; i < weights.frozen.size(); ++i)
            weights.frozen[i] = f->tensor.data[i] != 0.0 ? 1 : 0;
    }
    return {std::move(spec), std::move(weights)};
}

}  // namespace affect::checkpoint
