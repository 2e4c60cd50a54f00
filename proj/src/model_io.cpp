#include "ddl/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace ddl {

namespace {

constexpr int kFormatVersion = 1;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string classifier_form_name(ClassifierForm f) {
  return f == ClassifierForm::linear ? "linear" : "bilinear";
}

ClassifierForm classifier_form_from_name(const std::string& s) {
  if (s == "linear") return ClassifierForm::linear;
  if (s == "bilinear") return ClassifierForm::bilinear;
  throw DataError("unknown classifier form '" + s + "'");
}

void write_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
  out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

void write_optional_param(std::ostream& out, const char* name,
                          const std::optional<double>& v) {
  if (v) out << "param " << name << ' ' << format_double(*v) << '\n';
}

void write_model_body(std::ostream& out, const TrainedModel& model) {
  out << "method " << method_name(model.method) << '\n';
  out << "resolved " << method_name(model.resolved) << '\n';
  out << "dim " << model.dictionary.dim() << '\n';
  out << "atoms " << model.dictionary.size() << '\n';
  out << "classes " << model.num_classes << '\n';
  if (model.positive_class > 0)
    out << "positive_class " << model.positive_class << '\n';
  out << "classifier_form " << classifier_form_name(model.config.classifier_form)
      << '\n';
  out << "param atoms_per_class " << model.config.atoms_per_class << '\n';
  out << "param total_atoms " << model.config.total_atoms << '\n';
  out << "param seed " << model.config.seed << '\n';
  write_optional_param(out, "lambda", model.config.lambda);
  write_optional_param(out, "lambda0", model.config.lambda0);
  write_optional_param(out, "lambda1", model.config.lambda1);
  write_optional_param(out, "lambda2", model.config.lambda2);
  write_optional_param(out, "lambda3", model.config.lambda3);
  write_optional_param(out, "eta", model.config.eta);

  if (model.dictionary.structured()) {
    out << "atom_class";
    for (int c : model.dictionary.atom_class) out << ' ' << c;
    out << '\n';
  } else {
    out << "atom_class none\n";
  }

  write_matrix(out, "D", model.dictionary.atoms);
  if (model.classifier) {
    if (model.classifier->linear) write_matrix(out, "W", *model.classifier->linear);
    if (model.classifier->code_transform)
      write_matrix(out, "G", *model.classifier->code_transform);
    if (model.classifier->theta) write_matrix(out, "theta", *model.classifier->theta);
    out << "scalar bias " << format_double(model.classifier->bias) << '\n';
  }

  out << "submodels " << model.submodels.size() << '\n';
  for (const auto& sub : model.submodels) {
    out << "begin_submodel\n";
    write_model_body(out, sub);
    out << "end_submodel\n";
  }
}

class Reader {
public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string next_line() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty()) return line;
    }
    throw DataError("model file: unexpected end of file at line " +
                    std::to_string(line_no_));
  }

  size_t line_no() const { return line_no_; }

private:
  std::istream& in_;
  size_t line_no_ = 0;
};

Matrix read_matrix_rows(Reader& reader, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    std::istringstream row(reader.next_line());
    for (Index j = 0; j < cols; ++j)
      if (!(row >> m(i, j)))
        throw DataError("model file: short matrix row at line " +
                        std::to_string(reader.line_no()));
  }
  return m;
}

TrainedModel read_model_body(Reader& reader, const std::string& terminator) {
  TrainedModel model;
  ClassifierParams params;
  bool has_classifier = false;

  for (;;) {
    const std::string line = reader.next_line();
    if (line == terminator) break;
    std::istringstream ss(line);
    std::string key;
    ss >> key;

    if (key == "method") {
      std::string v;
      ss >> v;
      model.method = method_from_name(v);
      model.config.method = model.method;
    } else if (key == "resolved") {
      std::string v;
      ss >> v;
      model.resolved = method_from_name(v);
    } else if (key == "dim" || key == "atoms") {
      // shape lines are informative; the matrix blocks carry the real shapes
    } else if (key == "classes") {
      ss >> model.num_classes;
    } else if (key == "positive_class") {
      ss >> model.positive_class;
    } else if (key == "classifier_form") {
      std::string v;
      ss >> v;
      model.config.classifier_form = classifier_form_from_name(v);
    } else if (key == "param") {
      std::string name;
      double value;
      ss >> name >> value;
      if (name == "atoms_per_class")
        model.config.atoms_per_class = static_cast<int>(value);
      else if (name == "total_atoms")
        model.config.total_atoms = static_cast<int>(value);
      else if (name == "seed")
        model.config.seed = static_cast<std::uint64_t>(value);
      else if (name == "lambda")
        model.config.lambda = value;
      else if (name == "lambda0")
        model.config.lambda0 = value;
      else if (name == "lambda1")
        model.config.lambda1 = value;
      else if (name == "lambda2")
        model.config.lambda2 = value;
      else if (name == "lambda3")
        model.config.lambda3 = value;
      else if (name == "eta")
        model.config.eta = value;
      else
        throw DataError("model file: unknown parameter '" + name + "'");
    } else if (key == "atom_class") {
      std::string first;
      if (ss >> first && first != "none") {
        model.dictionary.atom_class.clear();
        model.dictionary.atom_class.push_back(std::stoi(first));
        int c;
        while (ss >> c) model.dictionary.atom_class.push_back(c);
      }
    } else if (key == "matrix") {
      std::string name;
      Index rows = -1, cols = -1;
      if (!(ss >> name >> rows >> cols) || rows < 0 || cols < 0)
        throw DataError("model file: malformed matrix header at line " +
                        std::to_string(reader.line_no()));
      Matrix m = read_matrix_rows(reader, rows, cols);
      if (name == "D")
        model.dictionary.atoms = std::move(m);
      else if (name == "W") {
        params.linear = std::move(m);
        has_classifier = true;
      } else if (name == "G") {
        params.code_transform = std::move(m);
        has_classifier = true;
      } else if (name == "theta") {
        params.theta = std::move(m);
        has_classifier = true;
      } else
        throw DataError("model file: unknown matrix '" + name + "'");
    } else if (key == "scalar") {
      std::string name;
      double value;
      ss >> name >> value;
      if (name != "bias") throw DataError("model file: unknown scalar '" + name + "'");
      params.bias = value;
      has_classifier = true;
    } else if (key == "submodels") {
      size_t count = 0;
      ss >> count;
      for (size_t i = 0; i < count; ++i) {
        if (reader.next_line() != "begin_submodel")
          throw DataError("model file: expected begin_submodel");
        model.submodels.push_back(read_model_body(reader, "end_submodel"));
      }
    } else {
      throw DataError("model file: unknown key '" + key + "' at line " +
                      std::to_string(reader.line_no()));
    }
  }

  if (has_classifier) model.classifier = std::move(params);
  return model;
}

} // namespace

void save_model(const TrainedModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "ddl-model " << kFormatVersion << '\n';
  write_model_body(out, model);
  out << "end\n";
  if (!out) throw DataError("write to '" + path + "' failed");
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  Reader reader(in);

  std::istringstream header(reader.next_line());
  std::string magic;
  int version = -1;
  header >> magic >> version;
  if (magic != "ddl-model")
    throw DataError("'" + path + "' is not a model file");
  if (version != kFormatVersion)
    throw DataError("unsupported model format version " + std::to_string(version) +
                    " (expected " + std::to_string(kFormatVersion) + ")");

  return read_model_body(reader, "end");
}

void save_trace_csv(const TrainingTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "iteration,objective\n";
  for (size_t i = 0; i < trace.objective.size(); ++i)
    out << i << ',' << format_double(trace.objective[i]) << '\n';
  if (!out) throw DataError("write to '" + path + "' failed");
}

} // namespace ddl
