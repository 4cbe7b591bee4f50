#include "resp/dataset_io.hpp"

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace resp::io {

namespace {

constexpr int kDatasetVersion = 1;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

double parse_double(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw IoError("trailing characters in number '" + s + "'");
        return v;
    } catch (const std::exception&) {
        throw IoError("malformed number '" + s + "'");
    }
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open '" + tmp + "' for writing");
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!f) throw IoError("write failed for '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed for '" + path + "': " + ec.message());
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void write_dataset(const std::string& path, const LabeledDataset& dataset, bool binary) {
    std::ostringstream os;
    os << "respdata," << kDatasetVersion << "," << dataset.n_t << "," << dataset.num_classes << ","
       << (binary ? "binary" : "text") << "\n";
    if (!binary) {
        for (const BreathingVector& v : dataset.samples) {
            if (v.n_t() != dataset.n_t) throw DataError("write_dataset: inconsistent n_t");
            os << v.source_id << "," << v.label;
            for (const PeriodTuple& p : v.periods)
                for (double x : p.values()) os << "," << format_double(x);
            os << "\n";
        }
        write_file_atomic(path, os.str());
        return;
    }
    for (const BreathingVector& v : dataset.samples) {
        if (v.n_t() != dataset.n_t) throw DataError("write_dataset: inconsistent n_t");
        const auto len = static_cast<std::uint32_t>(v.source_id.size());
        os.write(reinterpret_cast<const char*>(&len), sizeof(len));
        os.write(v.source_id.data(), static_cast<std::streamsize>(len));
        const auto lab = static_cast<std::int32_t>(v.label);
        os.write(reinterpret_cast<const char*>(&lab), sizeof(lab));
        for (const PeriodTuple& p : v.periods) {
            const auto vals = p.values();
            os.write(reinterpret_cast<const char*>(vals.data()), sizeof(double) * 6);
        }
    }
    write_file_atomic(path, os.str());
}

LabeledDataset read_dataset(const std::string& path) {
    const std::string content = read_file(path);
    const std::size_t eol = content.find('\n');
    if (eol == std::string::npos) throw IoError("dataset '" + path + "': missing header");
    const auto header = split(content.substr(0, eol), ',');
    if (header.size() != 5 || header[0] != "respdata")
        throw IoError("dataset '" + path + "': bad header");
    if (std::stoi(header[1]) != kDatasetVersion)
        throw IoError("dataset '" + path + "': unsupported version " + header[1]);

    LabeledDataset ds;
    ds.n_t = std::stoi(header[2]);
    ds.num_classes = std::stoi(header[3]);
    const bool binary = header[4] == "binary";
    if (!binary && header[4] != "text") throw IoError("dataset '" + path + "': bad mode");

    if (!binary) {
        std::size_t pos = eol + 1;
        while (pos < content.size()) {
            std::size_t next = content.find('\n', pos);
            if (next == std::string::npos) next = content.size();
            const std::string line = content.substr(pos, next - pos);
            pos = next + 1;
            if (line.empty()) continue;
            const auto fields = split(line, ',');
            if (static_cast<int>(fields.size()) != 2 + 6 * ds.n_t)
                throw IoError("dataset '" + path + "': bad record width");
            BreathingVector v;
            v.source_id = fields[0];
            v.label = std::stoi(fields[1]);
            v.periods.resize(static_cast<std::size_t>(ds.n_t));
            for (int t = 0; t < ds.n_t; ++t) {
                std::array<double, 6> vals;
                for (int c = 0; c < 6; ++c)
                    vals[static_cast<std::size_t>(c)] =
                        parse_double(fields[static_cast<std::size_t>(2 + 6 * t + c)]);
                v.periods[static_cast<std::size_t>(t)] = PeriodTuple::from_values(vals);
            }
            ds.samples.push_back(std::move(v));
        }
        return ds;
    }

    std::size_t pos = eol + 1;
    const auto need = [&](std::size_t n) {
        if (pos + n > content.size()) throw IoError("dataset '" + path + "': truncated");
    };
    while (pos < content.size()) {
        std::uint32_t len;
        need(sizeof(len));
        std::memcpy(&len, content.data() + pos, sizeof(len));
        pos += sizeof(len);
        need(len);
        BreathingVector v;
        v.source_id.assign(content.data() + pos, len);
        pos += len;
        std::int32_t lab;
        need(sizeof(lab));
        std::memcpy(&lab, content.data() + pos, sizeof(lab));
        pos += sizeof(lab);
        v.label = lab;
        need(sizeof(double) * 6 * static_cast<std::size_t>(ds.n_t));
        v.periods.resize(static_cast<std::size_t>(ds.n_t));
        for (int t = 0; t < ds.n_t; ++t) {
            std::array<double, 6> vals;
            std::memcpy(vals.data(), content.data() + pos, sizeof(double) * 6);
            pos += sizeof(double) * 6;
            v.periods[static_cast<std::size_t>(t)] = PeriodTuple::from_values(vals);
        }
        ds.samples.push_back(std::move(v));
    }
    return ds;
}

void write_series_csv(const std::string& path, const std::vector<double>& values,
                      double sample_rate) {
    std::ostringstream os;
    os << "t,position\n";
    for (std::size_t i = 0; i < values.size(); ++i)
        os << format_double(static_cast<double>(i) / sample_rate) << ","
           << format_double(values[i]) << "\n";
    write_file_atomic(path, os.str());
}

std::vector<double> read_series_csv(const std::string& path, double* sample_rate_out) {
    const std::string content = read_file(path);
    std::istringstream is(content);
    std::string line;
    if (!std::getline(is, line)) throw IoError("series '" + path + "': empty file");
    std::vector<double> values;
    std::vector<double> times;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 2) throw IoError("series '" + path + "': bad record");
        times.push_back(parse_double(fields[0]));
        values.push_back(parse_double(fields[1]));
    }
    if (sample_rate_out) {
        *sample_rate_out = times.size() >= 2 ? 1.0 / (times[1] - times[0]) : 0.0;
    }
    return values;
}

void write_marker_csv(const std::string& path, const Marker3DSeries& series) {
    std::ostringstream os;
    os << "t,x,y,z\n";
    for (std::size_t i = 0; i < series.positions.size(); ++i) {
        os << format_double(static_cast<double>(i) / series.sample_rate);
        for (int c = 0; c < 3; ++c)
            os << "," << format_double(series.positions[i][static_cast<std::size_t>(c)]);
        os << "\n";
    }
    write_file_atomic(path, os.str());
}

Marker3DSeries read_marker_csv(const std::string& path) {
    const std::string content = read_file(path);
    std::istringstream is(content);
    std::string line;
    if (!std::getline(is, line)) throw IoError("marker '" + path + "': empty file");
    Marker3DSeries series;
    std::vector<double> times;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 4) throw IoError("marker '" + path + "': bad record");
        times.push_back(parse_double(fields[0]));
        series.positions.push_back(
            {parse_double(fields[1]), parse_double(fields[2]), parse_double(fields[3])});
    }
    if (times.size() >= 2) series.sample_rate = 1.0 / (times[1] - times[0]);
    series.duration = static_cast<double>(series.positions.size()) / series.sample_rate;
    return series;
}

std::string file_hash_hex(const std::string& path) {
    const std::string content = read_file(path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : content) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return buf;
}

}  // namespace resp::io
