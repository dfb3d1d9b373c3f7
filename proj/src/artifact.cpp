#include "artifact.hpp"

#include <bit>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ordrec::artifact {

namespace {

static_assert(std::endian::native == std::endian::little,
              "artifact container assumes a little-endian host");

struct TensorDesc {
    std::string name;
    std::string dtype;  // "f32" or "i64"
    std::int64_t rows = 0, cols = 0;
    std::int64_t offset = 0;  // bytes from the start of the block section

    std::int64_t byte_size() const {
        return rows * cols * (dtype == "f32" ? 4 : 8);
    }
};

class ContainerWriter {
public:
    explicit ContainerWriter(std::string magic) : magic_(std::move(magic)) {}

    void meta(const std::string& key, const std::string& value) {
        meta_.emplace_back(key, value);
    }
    void meta_i64(const std::string& key, std::int64_t v) { meta(key, std::to_string(v)); }
    void meta_u64(const std::string& key, std::uint64_t v) { meta(key, std::to_string(v)); }
    void meta_f64(const std::string& key, double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        meta(key, buf);
    }

    void tensor_f32(const std::string& name, std::int64_t rows, std::int64_t cols,
                    const float* data) {
        add(name, "f32", rows, cols, data, std::size_t(rows * cols) * 4);
    }
    void tensor_i64(const std::string& name, std::int64_t rows, std::int64_t cols,
                    const std::int64_t* data) {
        add(name, "i64", rows, cols, data, std::size_t(rows * cols) * 8);
    }

    void write(const std::string& path) const {
        std::ostringstream head;
        head << magic_ << "\n";
        for (const auto& [k, v] : meta_) head << "meta " << k << " " << v << "\n";
        for (const auto& t : tensors_)
            head << "tensor " << t.name << " " << t.dtype << " " << t.rows << " "
                 << t.cols << " " << t.offset << "\n";
        head << "end\n";
        const std::string header = head.str();

        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + path);
        std::uint64_t sum = fnv1a64(header.data(), header.size());
        out.write(header.data(), std::streamsize(header.size()));
        out.write(blocks_.data(), std::streamsize(blocks_.size()));
        sum = fnv1a64(blocks_.data(), blocks_.size(), sum);
        out.write(reinterpret_cast<const char*>(&sum), 8);
        if (!out) throw DataError("write failed: " + path);
    }

private:
    void add(const std::string& name, const char* dtype, std::int64_t rows,
             std::int64_t cols, const void* data, std::size_t bytes) {
        TensorDesc d{name, dtype, rows, cols, std::int64_t(blocks_.size())};
        tensors_.push_back(d);
        const char* p = static_cast<const char*>(data);
        blocks_.insert(blocks_.end(), p, p + bytes);
    }

    std::string magic_;
    std::vector<std::pair<std::string, std::string>> meta_;
    std::vector<TensorDesc> tensors_;
    std::vector<char> blocks_;
};

struct Container {
    std::string magic;
    std::map<std::string, std::string> meta;
    std::vector<TensorDesc> tensors;
    std::vector<char> blocks;

    const TensorDesc& find(const std::string& name) const {
        for (const auto& t : tensors)
            if (t.name == name) return t;
        throw DataError("artifact is missing tensor '" + name + "'");
    }
    const std::string& meta_at(const std::string& key) const {
        auto it = meta.find(key);
        if (it == meta.end()) throw DataError("artifact is missing meta key '" + key + "'");
        return it->second;
    }
    std::int64_t meta_i64(const std::string& key) const {
        return std::stoll(meta_at(key));
    }
    std::uint64_t meta_u64(const std::string& key) const {
        return std::stoull(meta_at(key));
    }
    double meta_f64(const std::string& key) const { return std::stod(meta_at(key)); }

    std::vector<float> f32(const std::string& name, std::int64_t rows,
                           std::int64_t cols) const {
        const auto& t = find(name);
        if (t.dtype != "f32")
            throw DataError("tensor '" + name + "' has dtype " + t.dtype + ", expected f32");
        if (t.rows != rows || t.cols != cols)
            throw DataError("tensor '" + name + "' has shape " + std::to_string(t.rows) +
                            "x" + std::to_string(t.cols) + ", manifest declares " +
                            std::to_string(rows) + "x" + std::to_string(cols));
        std::vector<float> v(std::size_t(rows * cols));
        std::memcpy(v.data(), blocks.data() + t.offset, v.size() * 4);
        return v;
    }
    std::vector<std::int64_t> i64(const std::string& name, std::int64_t rows) const {
        const auto& t = find(name);
        if (t.dtype != "i64")
            throw DataError("tensor '" + name + "' has dtype " + t.dtype + ", expected i64");
        if (t.rows != rows || t.cols != 1)
            throw DataError("tensor '" + name + "' row count " + std::to_string(t.rows) +
                            " does not match declared count " + std::to_string(rows));
        std::vector<std::int64_t> v(static_cast<std::size_t>(rows));
        std::memcpy(v.data(), blocks.data() + t.offset, v.size() * 8);
        return v;
    }
};

Container read_container(const std::string& path, const std::string& expected_magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    if (bytes.size() < 8) throw DataError("truncated file: " + path);

    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
    const std::uint64_t actual = fnv1a64(bytes.data(), bytes.size() - 8);
    if (stored != actual)
        throw DataError("checksum mismatch in " + path + " (file is corrupt or truncated)");

    Container c;
    std::size_t pos = 0;
    auto next_line = [&]() {
        auto nl = std::find(bytes.begin() + std::ptrdiff_t(pos), bytes.end(), '\n');
        if (nl == bytes.end()) throw DataError("unterminated header in " + path);
        std::string line(bytes.begin() + std::ptrdiff_t(pos), nl);
        pos = std::size_t(nl - bytes.begin()) + 1;
        return line;
    };

    c.magic = next_line();
    if (c.magic != expected_magic)
        throw DataError("unsupported container version: file says '" + c.magic +
                        "', this build reads '" + expected_magic + "'");
    for (;;) {
        std::string line = next_line();
        if (line == "end") break;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "meta") {
            std::string key;
            ls >> key;
            std::string value;
            std::getline(ls, value);
            if (!value.empty() && value[0] == ' ') value.erase(0, 1);
            c.meta[key] = value;
        } else if (tag == "tensor") {
            TensorDesc d;
            ls >> d.name >> d.dtype >> d.rows >> d.cols >> d.offset;
            if (ls.fail() || (d.dtype != "f32" && d.dtype != "i64"))
                throw DataError("bad tensor descriptor in " + path + ": " + line);
            c.tensors.push_back(d);
        } else {
            throw DataError("bad header line in " + path + ": " + line);
        }
    }

    const std::size_t block_bytes = bytes.size() - 8 - pos;
    c.blocks.assign(bytes.begin() + std::ptrdiff_t(pos), bytes.end() - 8);
    for (const auto& t : c.tensors)
        if (t.offset < 0 || std::size_t(t.offset) + std::size_t(t.byte_size()) > block_bytes)
            throw DataError("tensor '" + t.name + "' extends past the data section of " + path);
    return c;
}

}  // namespace

void save(const ModelArtifact& a, const std::string& path) {
    const auto& cfg = a.cfg;
    const std::int64_t n_items = a.vocab.n_items();
    const std::int64_t n_out = a.vocab.n_outputs();
    if (cfg.n_outputs != n_out)
        throw DataError("artifact inconsistent: n_outputs != |output vocabulary|");
    if (std::int64_t(a.features.rows.size()) !=
        n_items * std::int64_t(a.features.feature_dim))
        throw DataError("artifact inconsistent: feature table shape");
    if (a.features.feature_dim != cfg.feature_dim)
        throw DataError("artifact inconsistent: feature_dim");

    ContainerWriter w(kModelMagic);
    w.meta_i64("seq_len_in", cfg.seq_len_in);
    w.meta_i64("feature_dim", cfg.feature_dim);
    w.meta_i64("hidden1", cfg.hidden1);
    w.meta_i64("hidden2", cfg.hidden2);
    w.meta_i64("n_outputs", cfg.n_outputs);
    w.meta_i64("n_items", n_items);
    w.meta_u64("model_seed", cfg.seed);
    w.meta_u64("shuffle_seed", a.meta.shuffle_seed);
    w.meta_i64("epochs_run", a.meta.epochs_run);
    w.meta_i64("batch_size", a.meta.batch_size);
    w.meta_f64("learning_rate", a.meta.learning_rate);
    w.meta_f64("final_train_loss", a.meta.final_train_loss);
    w.meta_f64("final_val_loss", a.meta.final_val_loss);

    w.tensor_i64("vocab.items", n_items, 1, a.vocab.items.data());
    w.tensor_i64("vocab.output_items", n_out, 1, a.vocab.output_items.data());
    w.tensor_f32("features", n_items, cfg.feature_dim, a.features.rows.data());
    auto layer = [&](const char* prefix, const lstm::LstmLayer<float>& L) {
        std::string p(prefix);
        w.tensor_f32(p + ".W", L.W.rows, L.W.cols, L.W.a.data());
        w.tensor_f32(p + ".U", L.U.rows, L.U.cols, L.U.a.data());
        w.tensor_f32(p + ".b", std::int64_t(L.b.size()), 1, L.b.data());
    };
    layer("lstm1", a.params.l1);
    layer("lstm2", a.params.l2);
    w.tensor_f32("out.W", a.params.out.W.rows, a.params.out.W.cols, a.params.out.W.a.data());
    w.tensor_f32("out.b", std::int64_t(a.params.out.b.size()), 1, a.params.out.b.data());
    w.write(path);
}

ModelArtifact load(const std::string& path) {
    Container c = read_container(path, kModelMagic);

    ModelArtifact a;
    a.cfg.seq_len_in = int(c.meta_i64("seq_len_in"));
    a.cfg.feature_dim = int(c.meta_i64("feature_dim"));
    a.cfg.hidden1 = int(c.meta_i64("hidden1"));
    a.cfg.hidden2 = int(c.meta_i64("hidden2"));
    a.cfg.n_outputs = int(c.meta_i64("n_outputs"));
    a.cfg.seed = c.meta_u64("model_seed");
    a.meta.shuffle_seed = c.meta_u64("shuffle_seed");
    a.meta.model_seed = a.cfg.seed;
    a.meta.epochs_run = int(c.meta_i64("epochs_run"));
    a.meta.batch_size = int(c.meta_i64("batch_size"));
    a.meta.learning_rate = c.meta_f64("learning_rate");
    a.meta.final_train_loss = c.meta_f64("final_train_loss");
    a.meta.final_val_loss = c.meta_f64("final_val_loss");
    if (a.cfg.seq_len_in < 1 || a.cfg.feature_dim < 1 || a.cfg.hidden1 < 1 ||
        a.cfg.hidden2 < 1 || a.cfg.n_outputs < 1)
        throw DataError("artifact declares non-positive dimensions");

    const std::int64_t n_items = c.meta_i64("n_items");
    a.vocab.items = c.i64("vocab.items", n_items);
    a.vocab.output_items = c.i64("vocab.output_items", a.cfg.n_outputs);
    for (std::size_t i = 1; i < a.vocab.items.size(); ++i)
        if (a.vocab.items[i] <= a.vocab.items[i - 1])
            throw DataError("vocabulary items are not strictly ascending");
    a.vocab.max_item_id = a.vocab.items.empty() ? 0 : a.vocab.items.back();
    for (std::size_t i = 0; i < a.vocab.items.size(); ++i)
        a.vocab.item_index.emplace(a.vocab.items[i], std::int32_t(i));
    for (std::size_t i = 0; i < a.vocab.output_items.size(); ++i) {
        if (!a.vocab.item_index.count(a.vocab.output_items[i]))
            throw DataError("output vocabulary contains unknown item");
        a.vocab.output_index.emplace(a.vocab.output_items[i], std::int32_t(i));
    }

    a.features.feature_dim = a.cfg.feature_dim;
    a.features.rows = c.f32("features", n_items, a.cfg.feature_dim);

    a.params = lstm::ModelParams<float>(a.cfg);
    auto layer = [&](const char* prefix, lstm::LstmLayer<float>& L) {
        std::string p(prefix);
        L.W.a = c.f32(p + ".W", L.W.rows, L.W.cols);
        L.U.a = c.f32(p + ".U", L.U.rows, L.U.cols);
        auto b = c.f32(p + ".b", std::int64_t(L.b.size()), 1);
        L.b.assign(b.begin(), b.end());
    };
    layer("lstm1", a.params.l1);
    layer("lstm2", a.params.l2);
    a.params.out.W.a = c.f32("out.W", a.cfg.n_outputs, a.cfg.hidden2);
    auto b = c.f32("out.b", a.cfg.n_outputs, 1);
    a.params.out.b.assign(b.begin(), b.end());
    return a;
}

void verify(const std::string& path) {
    read_container(path, kModelMagic);
}

void save_word2vec(const Word2VecModel& m, const std::string& path) {
    ContainerWriter w(kEmbeddingsMagic);
    w.meta_i64("window", m.cfg.window);
    w.meta_i64("dim", m.cfg.dim);
    w.meta_i64("negatives", m.cfg.negatives);
    w.meta_i64("epochs", m.cfg.epochs);
    w.meta_f64("initial_lr", m.cfg.initial_lr);
    w.meta_i64("min_count", m.cfg.min_count);
    w.meta_u64("seed", m.cfg.seed);
    w.meta_i64("n_items", m.n_items());
    w.tensor_i64("items", m.n_items(), 1, m.items.data());
    w.tensor_f32("input_vectors", m.n_items(), m.cfg.dim, m.input_vectors.data());
    w.tensor_f32("context_vectors", m.n_items(), m.cfg.dim, m.context_vectors.data());
    w.write(path);
}

Word2VecModel load_word2vec(const std::string& path) {
    Container c = read_container(path, kEmbeddingsMagic);
    Word2VecModel m;
    m.cfg.window = int(c.meta_i64("window"));
    m.cfg.dim = int(c.meta_i64("dim"));
    m.cfg.negatives = int(c.meta_i64("negatives"));
    m.cfg.epochs = int(c.meta_i64("epochs"));
    m.cfg.initial_lr = c.meta_f64("initial_lr");
    m.cfg.min_count = int(c.meta_i64("min_count"));
    m.cfg.seed = c.meta_u64("seed");
    const std::int64_t n = c.meta_i64("n_items");
    m.items = c.i64("items", n);
    m.input_vectors = c.f32("input_vectors", n, m.cfg.dim);
    m.context_vectors = c.f32("context_vectors", n, m.cfg.dim);
    for (std::size_t i = 0; i < m.items.size(); ++i)
        m.index.emplace(m.items[i], std::int32_t(i));
    return m;
}

std::string describe(const std::string& path) {
    // Either container kind; try the model magic first.
    Container c;
    try {
        c = read_container(path, kModelMagic);
    } catch (const DataError&) {
        c = read_container(path, kEmbeddingsMagic);
    }
    std::ostringstream out;
    out << c.magic << "\n";
    for (const auto& [k, v] : c.meta) out << "meta " << k << " = " << v << "\n";
    for (const auto& t : c.tensors) {
        double norm2 = 0;
        if (t.dtype == "f32") {
            const float* p = reinterpret_cast<const float*>(c.blocks.data() + t.offset);
            for (std::int64_t i = 0; i < t.rows * t.cols; ++i)
                norm2 += double(p[i]) * p[i];
        } else {
            const std::int64_t* p =
                reinterpret_cast<const std::int64_t*>(c.blocks.data() + t.offset);
            for (std::int64_t i = 0; i < t.rows * t.cols; ++i)
                norm2 += double(p[i]) * double(p[i]);
        }
        char buf[160];
        std::snprintf(buf, sizeof buf, "tensor %-16s %s %8" PRId64 " x %-8" PRId64
                      " l2=%.6g\n",
                      t.name.c_str(), t.dtype.c_str(), t.rows, t.cols, std::sqrt(norm2));
        out << buf;
    }
    return out.str();
}

void save_vocab(const Vocabulary& v, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << "ordrec.vocab.v1\n";
    for (std::size_t i = 0; i < v.items.size(); ++i)
        out << v.items[i] << "\t" << (v.is_output(v.items[i]) ? 1 : 0) << "\n";
    if (!out) throw DataError("write failed: " + path);
}

Vocabulary load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "ordrec.vocab.v1")
        throw DataError("bad vocab file header in " + path);
    Vocabulary v;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::int64_t item;
        int flag;
        if (std::sscanf(line.c_str(), "%" SCNd64 "\t%d", &item, &flag) != 2)
            throw DataError(path + " line " + std::to_string(lineno) + ": bad vocab row");
        if (!v.items.empty() && item <= v.items.back())
            throw DataError(path + " line " + std::to_string(lineno) +
                            ": items not strictly ascending");
        v.item_index.emplace(item, std::int32_t(v.items.size()));
        v.items.push_back(item);
        if (flag) {
            v.output_index.emplace(item, std::int32_t(v.output_items.size()));
            v.output_items.push_back(item);
        }
    }
    if (v.items.empty()) throw DataError("empty vocabulary in " + path);
    v.max_item_id = v.items.back();
    return v;
}

void save_windows(const std::vector<TrainingWindow>& ws, int seq_len,
                  const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out << "ordrec.windows.v1 seq_len=" << seq_len << "\n";
    for (const auto& w : ws) {
        out << w.source_user << "\t" << w.window_index << "\t";
        for (std::size_t i = 0; i < w.inputs.size(); ++i)
            out << (i ? "," : "") << w.inputs[i];
        out << "\t" << w.label << "\n";
    }
    if (!out) throw DataError("write failed: " + path);
}

std::vector<TrainingWindow> load_windows(const std::string& path, int* seq_len_out) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    int seq_len = 0;
    if (!std::getline(in, line) ||
        std::sscanf(line.c_str(), "ordrec.windows.v1 seq_len=%d", &seq_len) != 1 ||
        seq_len < 2)
        throw DataError("bad windows file header in " + path);
    if (seq_len_out) *seq_len_out = seq_len;

    std::vector<TrainingWindow> ws;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        TrainingWindow w;
        std::string items_field, label_field;
        if (!std::getline(ls, w.source_user, '\t'))
            throw DataError(path + " line " + std::to_string(lineno) + ": bad row");
        std::string idx_field;
        if (!std::getline(ls, idx_field, '\t') || !std::getline(ls, items_field, '\t') ||
            !std::getline(ls, label_field))
            throw DataError(path + " line " + std::to_string(lineno) + ": bad row");
        try {
            w.window_index = std::stoll(idx_field);
            w.label = std::stoll(label_field);
            std::istringstream is(items_field);
            std::string tok;
            while (std::getline(is, tok, ',')) w.inputs.push_back(std::stoll(tok));
        } catch (const std::exception&) {
            throw DataError(path + " line " + std::to_string(lineno) + ": bad number");
        }
        if (int(w.inputs.size()) != seq_len - 1)
            throw DataError(path + " line " + std::to_string(lineno) +
                            ": expected " + std::to_string(seq_len - 1) + " input items");
        ws.push_back(std::move(w));
    }
    return ws;
}

}  // namespace ordrec::artifact
