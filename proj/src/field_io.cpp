#include "qdlab/field_io.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace qdlab {

using nlohmann::json;

namespace {

json header_for(const Grid& g, const std::string& kind, const std::string& name) {
    json h;
    h["n"] = g.dim();
    h["dims"] = std::vector<int>(g.dims().begin(), g.dims().begin() + g.dim());
    std::vector<double> hs, org;
    for (int d = 0; d < g.dim(); ++d) {
        hs.push_back(g.spacing(d));
        org.push_back(g.origin(d));
    }
    h["h"] = hs;
    h["origin"] = org;
    h["kind"] = kind;
    h["name"] = name;
    return h;
}

void write_blob(const std::string& path, const json& header, const double* data,
                std::int64_t count) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("field file: cannot open for write: " + path);
    std::string hs = header.dump();
    std::uint32_t len = static_cast<std::uint32_t>(hs.size());
    unsigned char len_le[4] = {
        static_cast<unsigned char>(len & 0xff), static_cast<unsigned char>((len >> 8) & 0xff),
        static_cast<unsigned char>((len >> 16) & 0xff), static_cast<unsigned char>((len >> 24) & 0xff)};
    out.write("QDF1", 4);
    out.write(reinterpret_cast<const char*>(len_le), 4);
    out.write(hs.data(), hs.size());
    out.write(reinterpret_cast<const char*>(data), count * static_cast<std::int64_t>(sizeof(double)));
    if (!out) throw std::runtime_error("field file: short write: " + path);
}

Grid grid_from_header(const json& h) {
    int n = h.at("n").get<int>();
    auto dims = h.at("dims").get<std::vector<int>>();
    auto hs = h.at("h").get<std::vector<double>>();
    auto org = h.at("origin").get<std::vector<double>>();
    if (static_cast<int>(dims.size()) != n || static_cast<int>(hs.size()) != n ||
        static_cast<int>(org.size()) != n)
        throw std::runtime_error("field file: header shape arrays inconsistent with n");
    std::array<int, 3> d{1, 1, 1};
    std::array<double, 3> hh{1, 1, 1}, oo{0, 0, 0};
    for (int i = 0; i < n; ++i) { d[i] = dims[i]; hh[i] = hs[i]; oo[i] = org[i]; }
    return Grid(n, d, hh, oo);
}

}  // namespace

void write_field(const std::string& path, const ScalarField& f, const std::string& name) {
    write_blob(path, header_for(f.grid(), "scalar", name), f.data().data(), f.grid().size());
}

void write_field(const std::string& path, const VectorField& f, const std::string& name) {
    const Grid& g = f.grid();
    std::vector<double> interleaved(static_cast<std::size_t>(g.size()) * f.components());
    for (std::int64_t id = 0; id < g.size(); ++id)
        for (int c = 0; c < f.components(); ++c)
            interleaved[id * f.components() + c] = f.comp(c)[id];
    json h = header_for(g, "vector", name);
    h["components"] = f.components();
    write_blob(path, h, interleaved.data(), static_cast<std::int64_t>(interleaved.size()));
}

LoadedField read_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("field file: cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "QDF1", 4) != 0)
        throw std::runtime_error("field file: bad magic in " + path);
    unsigned char len_le[4];
    in.read(reinterpret_cast<char*>(len_le), 4);
    if (!in) throw std::runtime_error("field file: truncated header length in " + path);
    std::uint32_t len = len_le[0] | (len_le[1] << 8) | (len_le[2] << 16) |
                        (static_cast<std::uint32_t>(len_le[3]) << 24);
    if (len > (1u << 20)) throw std::runtime_error("field file: oversized header in " + path);
    std::string hs(len, '\0');
    in.read(hs.data(), len);
    if (!in) throw std::runtime_error("field file: truncated header in " + path);
    json h = json::parse(hs, nullptr, false);
    if (h.is_discarded()) throw std::runtime_error("field file: header is not valid JSON in " + path);

    LoadedField out;
    out.kind = h.at("kind").get<std::string>();
    out.name = h.value("name", "");
    Grid g = grid_from_header(h);
    std::int64_t count = g.size();
    int comps = 1;
    if (out.kind == "vector") {
        comps = h.at("components").get<int>();
        count *= comps;
    } else if (out.kind != "scalar") {
        throw std::runtime_error("field file: unsupported kind '" + out.kind + "' in " + path);
    }
    std::vector<double> payload(static_cast<std::size_t>(count));
    in.read(reinterpret_cast<char*>(payload.data()), count * static_cast<std::int64_t>(sizeof(double)));
    if (in.gcount() != count * static_cast<std::int64_t>(sizeof(double)))
        throw std::runtime_error("field file: payload shorter than dims demand in " + path);

    if (out.kind == "scalar") {
        out.scalar = ScalarField(g);
        for (std::int64_t id = 0; id < g.size(); ++id) out.scalar.at(id) = payload[id];
    } else {
        out.vector = VectorField(g, comps);
        for (std::int64_t id = 0; id < g.size(); ++id)
            for (int c = 0; c < comps; ++c) out.vector.at(c, id) = payload[id * comps + c];
    }
    return out;
}

void export_csv(const std::string& path, const ScalarField& f, const std::string& name,
                const std::string& tag) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("csv: cannot open for write: " + path);
    const Grid& g = f.grid();
    if (!tag.empty()) out << "# " << tag << "\n";
    for (int d = 0; d < g.dim(); ++d) out << "x" << d + 1 << ",";
    out << name << "\n";
    out.precision(17);
    for (int i = 0; i < g.dims(0); ++i)
        for (int j = 0; j < g.dims(1); ++j)
            for (int k = 0; k < g.dims(2); ++k) {
                out << g.coord(0, i);
                if (g.dim() > 1) out << "," << g.coord(1, j);
                if (g.dim() > 2) out << "," << g.coord(2, k);
                out << "," << f(i, j, k) << "\n";
            }
}

}  // namespace qdlab
