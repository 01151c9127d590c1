//! Default prompt templates for the preset recipes.
//!
//! The blueprint and self-RAG prompts ship verbatim (in-context examples
//! included); the remaining instructions are editable defaults in the same
//! register. Placeholders: {question}, {docs}, {prefix}, {feedback}, {plan}.

/// Direct citation generation over the rendered documents.
pub const ALCE_ANSWER: &str = "Instruction: Write an accurate, engaging, and concise answer for the given question using only the provided search results (some of which might be irrelevant) and cite them properly. Use an unbiased and journalistic tone. Always cite for any factual claim. When citing several search results, use [1][2][3]. Cite at least one document and at most three documents in each sentence. If multiple documents support the sentence, only cite a minimum sufficient subset of the documents.\n\nQuestion: {question}\n\n{docs}\n\nAnswer:";

/// Closed-book generation; citations are assigned post hoc.
pub const CLOSED_BOOK_ANSWER: &str = "Instruction: Write an accurate, engaging, and concise answer for the given question. Use an unbiased and journalistic tone.\n\nQuestion: {question}\n\nAnswer:";

/// Interactive answering over document summaries with a check action.
pub const INTERACT_ANSWER: &str = "Instruction: Write an accurate, engaging, and concise answer for the given question using only the provided search results (some of which might be irrelevant) and cite them properly. The search results are shown as summaries. To read the full text of a document before answering, reply with exactly check(k) where k is the document index. When you are ready, reply with the final answer only. Always cite for any factual claim. When citing several search results, use [1][2][3].\n\nQuestion: {question}\n\n{docs}\n\n{prefix}\n\nResponse:";

/// Span highlighting and clustering ahead of generation.
pub const ATTRIBUTE_CLUSTERS: &str = "In this task, you should select and cluster spans from the provided documents that are useful for answering the question. Group the spans into numbered clusters, one cluster per aspect of the answer. Write the cluster number on its own line, then each span under its document header, like:\n1.\nDocument [1]: <span text>\n\nQuestion: {question}\n\n{docs}\n\nClusters:";

/// One answer sentence from one span cluster.
pub const ATTRIBUTE_SENTENCE: &str = "Instruction: Write only a sentence as an accurate and concise part of the answer for the given question, using only the provided document spans, and cite the documents of the spans properly. When citing several search results, use [1][2][3].\n\nQuestion: {question}\n\nPrefix: {prefix}\n\nSpans:\n{plan}\n\nAnswer:";

/// Sub-question generation, one worked example included.
pub const BLUEPRINT_QUESTIONS: &str = "In this task, you should write no more than four subquestions according to the given documents and a question. Ensure that each subquestion can be respond by reading the documents, and is related to the question. Write then in only one paragraph.\n\nQuestion: Who is the original artist of sound of silence?\n\nDocument [1]: Sounds of Silence is the second studio album by Simon & Garfunkel, released on January 17, 1966. The album's title is a slight modification of the title of the duo's first major hit, \"The Sound of Silence\", which originally was released as \"The Sounds of Silence\". The song had earlier been released in an acoustic version on the album \"Wednesday Morning, 3 A.M.\", and later on the soundtrack to the movie \"The Graduate\".\nDocument [2]: Sound of Silence\" is a song performed by Australian recording artist Dami Im. Written by Anthony Egizii and David Musumeci of DNA Songs, it is best known as Australia's entry at the Eurovision Song Contest 2016 which was held in Stockholm, Sweden, where it finished 2nd, receiving a total of 511 points.\nDocument [3]: Simon & Garfunkel Simon & Garfunkel were an American folk rock duo consisting of singer-songwriter Paul Simon and singer Art Garfunkel. They were one of the bestselling music groups of the 1960s and became counterculture icons of the decade's social revolution, alongside artists such as the Beatles, the Beach Boys, and Bob Dylan. Their biggest hits\u{2014}including \"The Sound of Silence\" (1964), \"Mrs. Robinson\" (1968)\n\nSub-questions:\nWho is the original artist of sound of silence, the album? Who is the original artist of sound of silence, the song, released in 2016? Who is the original artist of sound of silence, the song, released in 1964?\"\n\n\nIn this task, you should write no more than four subquestions according to the given documents and a question. Ensure that each subquestion can be respond by reading the documents, and is related to the question. Write then in only one paragraph.\n\nQuestion: {question}\n\n{docs}\n\nSub-questions: ";

/// Answer generation guided by the blueprint sub-questions.
pub const BLUEPRINT_ANSWER: &str = "Instruction: Write an accurate, engaging, and concise answer for the given question using only the provided search results (some of which might be irrelevant) and cite them properly by answering all the subquestions. Each subquestion should be answered. Use an unbiased and journalistic tone. Always cite for any factual claim. When citing several search results, use [1][2][3]. Cite at least one document and at most three documents in each sentence. If multiple documents support the sentence, only cite a minimum sufficient subset of the documents.\n\nQuestion: {question}\n\nSub-questions: {plan}\n\n{docs}\n\nAnswer:";

/// Retrieval query generation, one worked example included.
pub const SELF_RAG_QUERY: &str = "In this task, you will be given a question, and you should generate a query to find relevent documents to help generating the answer. You may be given some sentences that have been generated as context, you should try to find documents that could support another claim other than sentences generated but still relevent to the question.\n\nGiven the original question: Who has the highest goals in world football?\nPlease generate one query to help find relevent documents, the query is:\n\n\nAnswer:\n\"Top goal scorer in world football 2021\"\n\nGiven the original question: {question}\nGenerated sentences: {prefix}\nPlease generate one query to help find relevent documents, the query is:\n\nAnswer:";

/// One answer sentence over the retrieved document, prefix threaded.
pub const SELF_RAG_ANSWER: &str = "Instruction: Write only a sentence as an accurate, engaging, and concise answer for the given question using only the provided search result. Use an unbiased and journalistic tone.\n\nQuestion:{question}\n\nPrefix:{prefix}\n\n{docs}\n\nAnswer: ";

/// The snippet variant: cite from snippets rather than full documents.
pub const SELF_RAG_SNIPPET_ANSWER: &str = "Instruction: You will be presented with a snippet from documents. Write only a sentence as an accurate, engaging, and concise answer for the given question using only the provided snippets. Use an unbiased and journalistic tone.\n\nQuestion:{question}\n\nPrefix:{prefix}\n\n{docs}\n\nAnswer: ";

/// Answer revision against feedback.
pub const REVISE_ANSWER: &str = "Instruction: Revise the answer to the question so that every factual claim is supported by the cited search results. Keep the parts of the answer that are already supported, correct or remove unsupported claims, and cite properly using [1][2][3].\n\nQuestion: {question}\n\n{docs}\n\nCurrent answer: {prefix}\n\nFeedback: {feedback}\n\nRevised answer:";
