#include "gibbsctrl/csv.hpp"

#include <fstream>
#include <stdexcept>

#include "gibbsctrl/util.hpp"

namespace gibbsctrl {

std::string csv_escape(const std::string& field) {
    bool needs_quotes = field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

struct CsvWriter::Impl {
    std::ofstream file;
    std::string path;
    size_t n_cols = 0;
};

CsvWriter::CsvWriter(std::string path, std::vector<std::string> columns)
    : impl_(new Impl) {
    impl_->path = path;
    impl_->n_cols = columns.size();
    impl_->file.open(path, std::ios::binary | std::ios::trunc);
    if (!impl_->file) {
        std::string msg = "csv: cannot open " + path;
        delete impl_;
        impl_ = nullptr;
        throw std::runtime_error(msg);
    }
    for (size_t i = 0; i < columns.size(); ++i) {
        if (i) impl_->file << ',';
        impl_->file << csv_escape(columns[i]);
    }
    impl_->file << '\n';
}

void CsvWriter::write_row(const std::vector<CsvValue>& row) {
    if (row.size() != impl_->n_cols)
        throw std::runtime_error("csv: row width does not match the schema in " +
                                 impl_->path);
    for (size_t i = 0; i < row.size(); ++i) {
        if (i) impl_->file << ',';
        const CsvValue& v = row[i];
        if (std::holds_alternative<double>(v)) {
            impl_->file << format_double(std::get<double>(v));
        } else if (std::holds_alternative<long long>(v)) {
            impl_->file << std::get<long long>(v);
        } else {
            impl_->file << csv_escape(std::get<std::string>(v));
        }
    }
    impl_->file << '\n';
    if (!impl_->file) throw std::runtime_error("csv: write failed for " + impl_->path);
}

void CsvWriter::close() {
    if (impl_ && impl_->file.is_open()) {
        impl_->file.close();
        if (!impl_->file) throw std::runtime_error("csv: close failed for " + impl_->path);
    }
}

CsvWriter::~CsvWriter() {
    if (impl_) {
        if (impl_->file.is_open()) impl_->file.close();
        delete impl_;
    }
}

CsvTable read_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("csv: cannot open " + path);
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> fields;
        std::string cur;
        bool quoted = false;
        for (size_t i = 0; i < line.size(); ++i) {
            char c = line[i];
            if (quoted) {
                if (c == '"') {
                    if (i + 1 < line.size() && line[i + 1] == '"') {
                        cur += '"';
                        ++i;
                    } else {
                        quoted = false;
                    }
                } else {
                    cur += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        fields.push_back(cur);
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            table.rows.push_back(std::move(fields));
        }
    }
    return table;
}

}  // namespace gibbsctrl
