#include "cpwopt/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cpwopt/error.hpp"

namespace cpwopt {

namespace {

using json = nlohmann::json;

constexpr int kModelVersion = 1;

// Reads lines, dropping comments and blank lines, and counts line numbers
// for error messages.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw IoError("line " + std::to_string(number_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::size_t number_ = 0;
};

std::vector<std::string> split(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

template <typename T>
bool parse_number(const std::string& tok, T& value) {
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, value);
  return ec == std::errc() && ptr == end;
}

// Values must be finite; "inf" and "nan" parse but are rejected.
bool parse_value(const std::string& tok, double& value) {
  return parse_number(tok, value) && std::isfinite(value);
}

std::string format_value(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw IoError("cannot format value");
  return {buf.data(), ptr};
}

void write_header(std::ostream& out, const Shape& shape) {
  out << "ndims " << shape.order() << "\ndims";
  for (Index d : shape.dims()) out << ' ' << d;
  out << '\n';
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

SparseSamples TensorFile::known() const {
  if (samples) return *samples;
  if (dense) return SparseSamples::from_dense(*dense);
  throw IoError("tensor file holds no data");
}

TensorFile read_tensor(std::istream& in) {
  LineReader reader(in);
  std::string line;
  if (!reader.next(line)) reader.fail("empty tensor file");
  auto tok = split(line);
  Index order = 0;
  if (tok.size() != 2 || tok[0] != "ndims" || !parse_number(tok[1], order) || order < 1) {
    reader.fail("expected 'ndims N' with N >= 1");
  }
  if (!reader.next(line)) reader.fail("missing 'dims' line");
  tok = split(line);
  if (tok.size() != order + 1 || tok[0] != "dims") reader.fail("expected 'dims' with N extents");
  std::vector<Index> dims(order);
  for (Index n = 0; n < order; ++n) {
    if (!parse_number(tok[n + 1], dims[n]) || dims[n] < 1) reader.fail("bad extent '" + tok[n + 1] + "'");
  }
  TensorFile file;
  try {
    file.shape = Shape(dims);
  } catch (const Error& e) {
    reader.fail(e.what());
  }
  const Shape& shape = file.shape;

  std::vector<std::vector<IndexList::Coord>> coords(order);
  std::vector<double> values;
  bool first = true;
  while (reader.next(line)) {
    tok = split(line);
    if (first && tok.size() == 1 && tok[0] == "dense") {
      std::vector<double> dense;
      dense.reserve(static_cast<std::size_t>(shape.numel()));
      while (reader.next(line)) {
        for (const auto& t : split(line)) {
          double v = 0.0;
          if (!parse_value(t, v)) reader.fail("bad value '" + t + "'");
          dense.push_back(v);
        }
      }
      if (dense.size() != shape.numel()) {
        throw IoError("dense tensor needs " + std::to_string(shape.numel()) + " values, found " +
                      std::to_string(dense.size()));
      }
      file.dense = DenseTensor(shape, std::move(dense));
      return file;
    }
    first = false;
    if (tok.size() != order + 1) reader.fail("expected " + std::to_string(order) + " indices and a value");
    for (Index n = 0; n < order; ++n) {
      Index i = 0;
      if (!parse_number(tok[n], i) || i < 1 || i > shape[n]) {
        reader.fail("index '" + tok[n] + "' out of range for mode " + std::to_string(n + 1));
      }
      coords[n].push_back(static_cast<IndexList::Coord>(i - 1));
    }
    double v = 0.0;
    if (!parse_value(tok[order], v)) reader.fail("bad value '" + tok[order] + "'");
    values.push_back(v);
  }
  if (values.empty()) throw IoError("tensor file has no entries");
  Eigen::VectorXd vals = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  try {
    file.samples = SparseSamples::from_unsorted(IndexList(shape, std::move(coords)), std::move(vals));
  } catch (const IndexError& e) {
    throw IoError(e.what());
  }
  return file;
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return read_tensor(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_coordinate(std::ostream& out, const SparseSamples& samples) {
  const Shape& shape = samples.shape();
  write_header(out, shape);
  const IndexList& idx = samples.indices();
  std::string line;
  for (std::size_t q = 0; q < samples.size(); ++q) {
    line.clear();
    for (Index n = 0; n < shape.order(); ++n) {
      line += std::to_string(idx.at(q, n) + 1);
      line += ' ';
    }
    line += format_value(samples.values()[static_cast<Eigen::Index>(q)]);
    line += '\n';
    out << line;
  }
}

void write_dense(std::ostream& out, const DenseTensor& tensor) {
  write_header(out, tensor.shape());
  out << "dense\n";
  for (double v : tensor.values()) out << format_value(v) << '\n';
}

void write_coordinate_file(const std::filesystem::path& path, const SparseSamples& samples) {
  std::ostringstream ss;
  write_coordinate(ss, samples);
  write_text_atomic(path, ss.str());
}

void write_dense_file(const std::filesystem::path& path, const DenseTensor& tensor) {
  std::ostringstream ss;
  write_dense(ss, tensor);
  write_text_atomic(path, ss.str());
}

std::vector<std::vector<Index>> read_index_requests(std::istream& in, const Shape& shape) {
  LineReader reader(in);
  std::string line;
  std::vector<std::vector<Index>> out;
  while (reader.next(line)) {
    const auto tok = split(line);
    if (tok.size() != shape.order()) {
      reader.fail("expected " + std::to_string(shape.order()) + " indices");
    }
    std::vector<Index> subs(shape.order());
    for (Index n = 0; n < shape.order(); ++n) {
      Index i = 0;
      if (!parse_number(tok[n], i) || i < 1 || i > shape[n]) {
        throw IndexError("index '" + tok[n] + "' out of range for mode " + std::to_string(n + 1));
      }
      subs[n] = i - 1;
    }
    out.push_back(std::move(subs));
  }
  return out;
}

std::string model_to_json(const KruskalModel& model) {
  model.validate();
  json j;
  j["format"] = "cpwopt-model";
  j["version"] = kModelVersion;
  j["shape"] = model.shape().dims();
  j["rank"] = model.rank();
  j["lambda"] = std::vector<double>(model.lambda.data(), model.lambda.data() + model.lambda.size());
  json factors = json::array();
  for (const auto& a : model.factors) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      std::vector<double> row(static_cast<std::size_t>(a.cols()));
      for (Eigen::Index r = 0; r < a.cols(); ++r) row[static_cast<std::size_t>(r)] = a(i, r);
      rows.push_back(std::move(row));
    }
    factors.push_back(std::move(rows));
  }
  j["factors"] = std::move(factors);
  return j.dump(1) + "\n";
}

KruskalModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "cpwopt-model") throw IoError("not a model file");
    if (j.at("version").get<int>() != kModelVersion) {
      throw IoError("unsupported model file version " + j.at("version").dump());
    }
    const auto dims = j.at("shape").get<std::vector<Index>>();
    const auto rank = j.at("rank").get<Index>();
    const auto lambda = j.at("lambda").get<std::vector<double>>();
    const auto& factors = j.at("factors");
    if (lambda.size() != rank || factors.size() != dims.size()) {
      throw IoError("model file: rank or mode count inconsistent");
    }
    std::vector<FactorMatrix> mats;
    for (std::size_t n = 0; n < dims.size(); ++n) {
      const auto rows = factors[n].get<std::vector<std::vector<double>>>();
      if (rows.size() != dims[n]) throw IoError("model file: wrong row count in mode " + std::to_string(n + 1));
      FactorMatrix a(static_cast<Eigen::Index>(dims[n]), static_cast<Eigen::Index>(rank));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rank) throw IoError("model file: wrong column count");
        for (std::size_t r = 0; r < rank; ++r) {
          a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)) = rows[i][r];
        }
      }
      mats.push_back(std::move(a));
    }
    Eigen::VectorXd lam = Eigen::Map<const Eigen::VectorXd>(lambda.data(), static_cast<Eigen::Index>(rank));
    return KruskalModel(std::move(mats), std::move(lam));
  } catch (const json::exception& e) {
    throw IoError(std::string("model file: ") + e.what());
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw IoError(std::string("model file: ") + e.what());
  }
}

void write_model_file(const std::filesystem::path& path, const KruskalModel& model) {
  write_text_atomic(path, model_to_json(model));
}

KruskalModel read_model_file(const std::filesystem::path& path) {
  return model_from_json(read_text_file(path));
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out = open_out(tmp);
    out << text;
    out.close();
    if (!out) throw IoError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename onto '" + path.string() + "': " + ec.message());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace cpwopt
