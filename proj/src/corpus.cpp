#include "unitscope/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include "unitscope/rng.hpp"
#include "unitscope/text.hpp"

namespace unitscope {

const std::string& Alphabet::default_characters() {
    static const std::string chars =
        "abcdefghijklmnopqrstuvwxyz"
        "0123456789"
        " "
        "-,;.!?:'\"()/|_#$%&*~+=<>[]{}";
    return chars;
}

Alphabet::Alphabet() : Alphabet(default_characters()) {}

Alphabet::Alphabet(const std::string& characters) : characters_(characters) {
    if (characters_.empty()) throw std::invalid_argument("alphabet: empty character set");
    ascii_lookup_.fill(-1);
    for (int i = 0; i < static_cast<int>(characters_.size()); ++i) {
        const unsigned char c = static_cast<unsigned char>(characters_[i]);
        if (c >= 128) throw std::invalid_argument("alphabet: only ASCII characters supported");
        if (ascii_lookup_[c] != -1) throw std::invalid_argument("alphabet: duplicate character");
        ascii_lookup_[c] = i;
    }
}

int Alphabet::index_of(std::uint32_t code_point) const {
    if (code_point >= 'A' && code_point <= 'Z') code_point = code_point - 'A' + 'a';
    if (code_point < 128) {
        const int idx = ascii_lookup_[code_point];
        if (idx >= 0) return idx;
    }
    return unknown_index();
}

std::vector<int> Alphabet::encode(const std::string& text) const {
    const std::vector<std::uint32_t> cps = utf8_decode(text);
    std::vector<int> out;
    out.reserve(cps.size());
    for (std::uint32_t cp : cps) out.push_back(index_of(cp));
    return out;
}

std::string Alphabet::decode(const std::vector<int>& encoded) const {
    std::string out;
    out.reserve(encoded.size());
    for (int idx : encoded) {
        if (idx >= 0 && idx < size()) {
            out.push_back(characters_[static_cast<std::size_t>(idx)]);
        } else if (idx == unknown_index()) {
            out.push_back(kUnknownChar);
        } else if (idx == dummy_index()) {
            out.push_back(kDummyChar);
        } else {
            throw std::out_of_range("alphabet: index out of range in decode");
        }
    }
    return out;
}

bool Corpus::labeled() const {
    return !sentences.empty() &&
           std::all_of(sentences.begin(), sentences.end(),
                       [](const Sentence& s) { return s.label.has_value(); });
}

int Corpus::replication_length() const {
    return std::max(1, static_cast<int>(avg_char_length));
}

namespace {

Corpus finalize_corpus(std::vector<Sentence>&& sentences, const Alphabet& alphabet,
                       int num_classes) {
    if (sentences.empty()) throw std::runtime_error("empty corpus");
    Corpus corpus;
    corpus.alphabet = alphabet;
    corpus.sentences = std::move(sentences);

    double total = 0.0;
    int max_label = -1;
    for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
        Sentence& s = corpus.sentences[i];
        s.id = static_cast<int>(i);
        total += static_cast<double>(s.encoded.size());
        if (s.label) {
            if (*s.label < 0) throw std::runtime_error("negative label");
            max_label = std::max(max_label, *s.label);
        }
    }
    corpus.avg_char_length = total / static_cast<double>(corpus.sentences.size());
    corpus.num_classes = num_classes > 0 ? num_classes : max_label + 1;
    if (max_label >= 0 && corpus.num_classes <= max_label) {
        throw std::runtime_error("label " + std::to_string(max_label) +
                                 " out of range for " + std::to_string(corpus.num_classes) +
                                 " classes");
    }
    return corpus;
}

}  // namespace

Corpus make_corpus(std::vector<Sentence> sentences, const Alphabet& alphabet, int num_classes) {
    for (Sentence& s : sentences) {
        if (s.encoded.empty()) s.encoded = alphabet.encode(s.text);
    }
    return finalize_corpus(std::move(sentences), alphabet, num_classes);
}

Corpus load_corpus(const std::string& path, const Alphabet& alphabet, int num_classes) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus file: " + path);

    std::vector<Sentence> sentences;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        Sentence s;
        const std::size_t tab = line.find('\t');
        if (tab != std::string::npos) {
            long long label = 0;
            if (!parse_int(line.substr(0, tab), label) || label < 0) {
                throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                         ": malformed line (label prefix is not a non-negative integer)");
            }
            s.label = static_cast<int>(label);
            s.text = line.substr(tab + 1);
        } else {
            s.text = line;
        }
        if (trim(s.text).empty()) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": malformed line (empty sentence)");
        }
        s.encoded = alphabet.encode(s.text);
        sentences.push_back(std::move(s));
    }
    if (sentences.empty()) throw std::runtime_error("empty corpus: " + path);

    if (num_classes > 0) {
        for (std::size_t i = 0; i < sentences.size(); ++i) {
            if (sentences[i].label && *sentences[i].label >= num_classes) {
                throw std::runtime_error(path + ": label " + std::to_string(*sentences[i].label) +
                                         " out of declared range [0, " +
                                         std::to_string(num_classes) + ")");
            }
        }
    }
    return finalize_corpus(std::move(sentences), alphabet, num_classes);
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write corpus file: " + path);
    for (const Sentence& s : corpus.sentences) {
        if (s.label) out << *s.label << '\t';
        out << s.text << '\n';
    }
}

SyntheticSpec load_synthetic_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open synthetic spec: " + path);

    SyntheticSpec spec;
    spec.filler.clear();
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        auto bad = [&](const std::string& why) {
            return std::runtime_error(path + ":" + std::to_string(line_no) + ": " + why);
        };

        long long iv = 0;
        if (key == "classes") {
            if (!parse_int(value, iv) || iv < 1) throw bad("classes must be a positive integer");
            spec.classes = static_cast<int>(iv);
        } else if (key == "sentences") {
            if (!parse_int(value, iv) || iv < 1) throw bad("sentences must be a positive integer");
            spec.sentences = static_cast<int>(iv);
        } else if (key == "words_min") {
            if (!parse_int(value, iv) || iv < 1) throw bad("words_min must be a positive integer");
            spec.words_min = static_cast<int>(iv);
        } else if (key == "words_max") {
            if (!parse_int(value, iv) || iv < 1) throw bad("words_max must be a positive integer");
            spec.words_max = static_cast<int>(iv);
        } else if (key == "seed") {
            if (!parse_int(value, iv) || iv < 0) throw bad("seed must be a non-negative integer");
            spec.seed = static_cast<std::uint64_t>(iv);
        } else if (key == "force_plant") {
            spec.force_plant = (value == "true" || value == "1" || value == "yes");
        } else if (key == "filler") {
            for (std::string& w : split_whitespace(value)) spec.filler.push_back(fold_case(w));
        } else if (key == "plant") {
            // class:text:probability, text may contain spaces
            const std::size_t c1 = value.find(':');
            const std::size_t c2 = value.rfind(':');
            if (c1 == std::string::npos || c2 == c1) throw bad("plant must be class:text:probability");
            Plant p;
            if (!parse_int(value.substr(0, c1), iv) || iv < 0) throw bad("plant class must be a non-negative integer");
            p.class_index = static_cast<int>(iv);
            p.text = fold_case(trim(value.substr(c1 + 1, c2 - c1 - 1)));
            if (p.text.empty()) throw bad("plant text is empty");
            if (!parse_double(value.substr(c2 + 1), p.probability) || p.probability < 0.0 ||
                p.probability > 1.0) {
                throw bad("plant probability must be in [0, 1]");
            }
            spec.plants.push_back(std::move(p));
        } else {
            throw bad("unknown key '" + key + "'");
        }
    }
    return spec;
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.classes < 1) throw std::invalid_argument("synthetic spec: zero classes");
    if (spec.filler.empty()) throw std::invalid_argument("synthetic spec: empty filler vocabulary");
    if (spec.sentences < 1) throw std::invalid_argument("synthetic spec: zero sentences");
    if (spec.words_min < 1 || spec.words_max < spec.words_min) {
        throw std::invalid_argument("synthetic spec: bad sentence-length range");
    }
    for (const Plant& p : spec.plants) {
        if (p.class_index < 0 || p.class_index >= spec.classes) {
            throw std::invalid_argument("synthetic spec: plant class out of range: " + p.text);
        }
    }

    std::vector<std::vector<const Plant*>> by_class(static_cast<std::size_t>(spec.classes));
    for (const Plant& p : spec.plants) {
        by_class[static_cast<std::size_t>(p.class_index)].push_back(&p);
    }
    if (spec.force_plant) {
        for (int c = 0; c < spec.classes; ++c) {
            if (by_class[static_cast<std::size_t>(c)].empty()) {
                throw std::invalid_argument("synthetic spec: class " + std::to_string(c) +
                                            " has no plants but force_plant is on");
            }
        }
    }

    Rng rng(spec.seed.value_or(seed));
    std::vector<Sentence> sentences;
    sentences.reserve(static_cast<std::size_t>(spec.sentences));

    for (int i = 0; i < spec.sentences; ++i) {
        const int cls = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.classes)));
        const int n_words =
            spec.words_min +
            static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.words_max - spec.words_min + 1)));

        std::vector<std::string> words;
        words.reserve(static_cast<std::size_t>(n_words) + 4);
        for (int w = 0; w < n_words; ++w) {
            words.push_back(spec.filler[static_cast<std::size_t>(rng.below(spec.filler.size()))]);
        }

        const auto& plants = by_class[static_cast<std::size_t>(cls)];
        std::vector<const Plant*> chosen;
        for (const Plant* p : plants) {
            if (rng.uniform() < p->probability) chosen.push_back(p);
        }
        if (chosen.empty() && spec.force_plant && !plants.empty()) {
            chosen.push_back(plants[static_cast<std::size_t>(rng.below(plants.size()))]);
        }
        // Insert each chosen plant at a random word position. Multi-word
        // plants occupy consecutive slots so they stay contiguous.
        for (const Plant* p : chosen) {
            const std::vector<std::string> parts = split_whitespace(p->text);
            const std::size_t pos = static_cast<std::size_t>(rng.below(words.size() + 1));
            words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), parts.begin(), parts.end());
        }

        Sentence s;
        s.label = cls;
        for (std::size_t w = 0; w < words.size(); ++w) {
            if (w) s.text.push_back(' ');
            s.text += words[w];
        }
        sentences.push_back(std::move(s));
    }

    SyntheticCorpus out;
    out.corpus = make_corpus(std::move(sentences), Alphabet(), spec.classes);
    out.plants = spec.plants;
    return out;
}

}  // namespace unitscope
