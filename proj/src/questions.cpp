#include "guesslab/questions.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "guesslab/common.hpp"

namespace guesslab {

const char* const kRegionNames[kNumRegions] = {"top left", "top right", "bottom left",
                                               "bottom right", "middle"};

std::string qtype_name(QType t) {
    switch (t) {
        case QType::Supercategory: return "supercategory";
        case QType::Object: return "object";
        case QType::Color: return "color";
        case QType::Size: return "size";
        case QType::Texture: return "texture";
        case QType::Shape: return "shape";
        case QType::Location: return "location";
    }
    throw validation_error("unknown qtype");
}

QType qtype_from_name(const std::string& name) {
    for (std::size_t i = 0; i < kNumQTypes; ++i)
        if (qtype_name(static_cast<QType>(i)) == name) return static_cast<QType>(i);
    throw parse_error("unknown qtype name: " + name);
}

std::string answer_name(Answer a) {
    switch (a) {
        case Answer::Yes: return "yes";
        case Answer::No: return "no";
        case Answer::NA: return "na";
    }
    throw validation_error("unknown answer");
}

Answer answer_from_name(const std::string& name) {
    if (name == "yes") return Answer::Yes;
    if (name == "no") return Answer::No;
    if (name == "na") return Answer::NA;
    throw parse_error("unknown answer name: " + name);
}

namespace {

std::string article_for(const std::string& noun) {
    if (noun.empty()) return "a";
    switch (noun.front()) {
        case 'a': case 'e': case 'i': case 'o': case 'u': return "an";
        default: return "a";
    }
}

}  // namespace

QuestionBank::QuestionBank(const CategoryVocabulary& vocab, std::set<QType> disabled)
    : vocab_(&vocab), disabled_(std::move(disabled)) {
    for (std::size_t t = 0; t < kNumQTypes; ++t)
        max_arg_space_ = std::max(max_arg_space_, arg_space(static_cast<QType>(t)));

    for (std::size_t t = 0; t < kNumQTypes; ++t) {
        const QType qt = static_cast<QType>(t);
        for (std::size_t a = 0; a < arg_space(qt); ++a) {
            Question q;
            q.qtype = qt;
            q.argument = static_cast<int>(a);
            q.text = render(qt, q.argument);
            templates_.push_back(std::move(q));
        }
    }

    // Questioner templates only mention in-domain vocabulary.
    std::set<int> known_supers;
    for (std::size_t i = 0; i < vocab.categories.size(); ++i)
        if (vocab.domain[i] == Domain::InDomain)
            known_supers.insert(vocab.categories[i].supercategory);
    for (std::size_t id = 0; id < templates_.size(); ++id) {
        const Question& q = templates_[id];
        if (q.qtype == QType::Object && !vocab.is_in_domain(q.argument)) continue;
        if (q.qtype == QType::Supercategory && !known_supers.count(q.argument)) continue;
        questioner_pool_.push_back(id);
    }
}

std::size_t QuestionBank::arg_space(QType t) const {
    switch (t) {
        case QType::Supercategory: return vocab_->supercategories.size();
        case QType::Object: return vocab_->categories.size();
        case QType::Color: return vocab_->attr_values[0].size();
        case QType::Size: return vocab_->attr_values[1].size();
        case QType::Texture: return vocab_->attr_values[2].size();
        case QType::Shape: return vocab_->attr_values[3].size();
        case QType::Location: return kNumRegions;
    }
    throw validation_error("unknown qtype");
}

std::size_t QuestionBank::template_id(QType t, int argument) const {
    std::size_t id = 0;
    for (std::size_t k = 0; k < static_cast<std::size_t>(t); ++k)
        id += arg_space(static_cast<QType>(k));
    id += static_cast<std::size_t>(argument);
    if (id >= templates_.size() ||
        static_cast<std::size_t>(argument) >= arg_space(t))
        throw validation_error("template_id: argument out of range");
    return id;
}

Vec QuestionBank::encode(const Question& q) const {
    if (static_cast<std::size_t>(q.argument) >= arg_space(q.qtype))
        throw validation_error("encode_question: unknown argument " +
                               std::to_string(q.argument) + " for qtype " +
                               qtype_name(q.qtype));
    Vec out(d_q(), 0.0);
    out[static_cast<std::size_t>(q.qtype)] = 1.0;
    out[kNumQTypes + static_cast<std::size_t>(q.argument)] = 1.0;
    return out;
}

std::string QuestionBank::render(QType t, int argument) const {
    const std::size_t a = static_cast<std::size_t>(argument);
    switch (t) {
        case QType::Supercategory: {
            const std::string& n = vocab_->supercategories.at(a).name;
            return "is it " + article_for(n) + " " + n + "?";
        }
        case QType::Object:
            return "is it the " + vocab_->categories.at(a).name + "?";
        case QType::Color: return "is it " + vocab_->attr_values[0].at(a) + "?";
        case QType::Size: return "is it " + vocab_->attr_values[1].at(a) + "?";
        case QType::Texture: return "is it " + vocab_->attr_values[2].at(a) + "?";
        case QType::Shape: return "is it " + vocab_->attr_values[3].at(a) + "?";
        case QType::Location:
            return "is it in the " + std::string(kRegionNames[a]) + "?";
    }
    throw validation_error("unknown qtype");
}

bool QuestionBank::is_animate_object_question(const Question& q) const {
    if (q.qtype != QType::Object) return false;
    return vocab_->categories.at(static_cast<std::size_t>(q.argument)).animate;
}

bool QuestionBank::in_region(double xc, double yc, Region r) {
    switch (r) {
        case Region::TopLeft: return xc < 0.0 && yc < 0.0;
        case Region::TopRight: return xc >= 0.0 && yc < 0.0;
        case Region::BottomLeft: return xc < 0.0 && yc >= 0.0;
        case Region::BottomRight: return xc >= 0.0 && yc >= 0.0;
        case Region::Middle: return std::abs(xc) <= 0.5 && std::abs(yc) <= 0.5;
    }
    throw validation_error("unknown region");
}

Answer QuestionBank::ground_truth(const Scene& scene, const GameObject& obj,
                                  const Question& q) const {
    (void)scene;
    if (disabled_.count(q.qtype)) return Answer::NA;
    switch (q.qtype) {
        case QType::Supercategory: {
            int sc = vocab_->categories.at(static_cast<std::size_t>(obj.category)).supercategory;
            return sc == q.argument ? Answer::Yes : Answer::No;
        }
        case QType::Object:
            return obj.category == q.argument ? Answer::Yes : Answer::No;
        case QType::Color:
            return obj.attrs.color == q.argument ? Answer::Yes : Answer::No;
        case QType::Size:
            return obj.attrs.size == q.argument ? Answer::Yes : Answer::No;
        case QType::Texture:
            return obj.attrs.texture == q.argument ? Answer::Yes : Answer::No;
        case QType::Shape:
            return obj.attrs.shape == q.argument ? Answer::Yes : Answer::No;
        case QType::Location: {
            // spatial[4], spatial[5] are the normalized box center.
            return in_region(obj.spatial[4], obj.spatial[5], static_cast<Region>(q.argument))
                       ? Answer::Yes
                       : Answer::No;
        }
    }
    throw validation_error("unknown qtype");
}

void write_template_table(const std::string& path, const QuestionBank& bank) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot open template table for writing: " + path);
    out << "# question templates v1\n";
    out << "# id\tqtype\targument\ttext\n";
    for (std::size_t id = 0; id < bank.num_templates(); ++id) {
        const Question& q = bank.question(id);
        out << id << "\t" << qtype_name(q.qtype) << "\t" << q.argument << "\t" << q.text
            << "\n";
    }
}

}  // namespace guesslab
