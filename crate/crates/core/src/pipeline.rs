//! Per-sentence section building: ties the component verbalizers to a
//! prompt setting.

use thiserror::Error;

use crate::conllu::Sentence;
use crate::construction::{verbalize_constructions_detailed, ConstructionError, RuleSet, TranslitTable};
use crate::dep::{verbalize_dependencies, DepError, DepParams, RelationGlossTable};
use crate::lexicon::{filter_entries, lookup, verbalize_lexicon, LexParams, LexiconIndex};
use crate::prompt::{assemble, conllu_section, Prompt, PromptError, SectionKind, SectionText, Setting, Templates};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dep(#[from] DepError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Everything needed to build prompts; immutable and shareable across threads.
#[derive(Clone, Debug)]
pub struct Components {
    pub lexicon: LexiconIndex,
    pub lex_params: LexParams,
    pub dep_params: DepParams,
    pub gloss_table: RelationGlossTable,
    pub rules: RuleSet,
    pub translit: TranslitTable,
    pub include_conllu_comments: bool,
    pub templates: Templates,
}

impl Components {
    /// Bundled tables, rule pack and templates with the fixed parameters.
    pub fn with_lexicon(lexicon: LexiconIndex) -> Self {
        Components {
            lexicon,
            lex_params: LexParams::default(),
            dep_params: DepParams::default(),
            gloss_table: RelationGlossTable::default(),
            rules: RuleSet::starter(),
            translit: TranslitTable::default(),
            include_conllu_comments: false,
            templates: Templates::default(),
        }
    }

    pub fn section(&self, sentence: &Sentence, kind: SectionKind) -> Result<SectionText, PipelineError> {
        Ok(match kind {
            SectionKind::Lex => {
                let hits = filter_entries(&lookup(sentence, &self.lexicon), &self.lex_params);
                verbalize_lexicon(&hits, &self.lex_params)
            }
            SectionKind::Conll => conllu_section(sentence, self.include_conllu_comments),
            SectionKind::Dep => verbalize_dependencies(sentence, &self.dep_params, &self.gloss_table)?,
            SectionKind::Con => {
                verbalize_constructions_detailed(sentence, &self.rules, &self.translit)?.section
            }
        })
    }

    /// Sections included by `setting`, in canonical order.
    pub fn sections(&self, sentence: &Sentence, setting: Setting) -> Result<Vec<SectionText>, PipelineError> {
        setting
            .kinds()
            .into_iter()
            .map(|k| self.section(sentence, k))
            .collect()
    }

    pub fn prompt(&self, sentence: &Sentence, setting: Setting) -> Result<Prompt, PipelineError> {
        let sections = self.sections(sentence, setting)?;
        Ok(assemble(&sentence.source_text(), &sections, setting, &self.templates)?)
    }
}
